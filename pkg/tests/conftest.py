import numpy as np
import pytest

from splatlight.geometry import Camera, conic_and_radius


def make_rng(seed):
    return np.random.default_rng(seed)


@pytest.fixture
def rng():
    return make_rng(0)


def random_splats(rng, n, width, height, spread=6.0):
    """2D splat inputs for the raster kernels: means, conics, radii, etc."""
    means2d = np.column_stack([rng.uniform(-spread, width + spread, n),
                               rng.uniform(-spread, height + spread, n)])
    a = rng.normal(0.0, 1.4, (n, 2, 2))
    cov = a @ a.transpose(0, 2, 1) + 0.3 * np.eye(2)
    conics, radii = conic_and_radius(cov)
    opac = rng.uniform(0.05, 0.95, n)
    colors = rng.uniform(0.0, 1.0, (n, 3))
    depths = rng.uniform(0.5, 6.0, n)
    return means2d, conics, radii.astype(np.float64), opac, colors, depths


def gaussian_cloud(rng, n, radius=0.5):
    """World-space Gaussian blocks for shading/shadow/render tests."""
    from splatlight.geometry import normalize_np

    def logit(p):
        return np.log(p / (1.0 - p))

    dirs = normalize_np(rng.normal(size=(n, 3)))
    positions = dirs * radius * rng.uniform(0.0, 1.0, (n, 1)) ** (1.0 / 3.0)
    blocks = {
        "positions": positions,
        "log_scales": np.log(rng.uniform(0.06, 0.16, (n, 3))),
        "quats": normalize_np(rng.normal(size=(n, 4))),
        "opacity_raw": logit(rng.uniform(0.4, 0.95, n)),
        "cd_raw": logit(rng.uniform(0.15, 0.85, (n, 3))),
        "cs_raw": logit(rng.uniform(0.1, 0.5, (n, 3))),
        "csss_raw": logit(rng.uniform(0.2, 0.8, (n, 3))),
        "embed": rng.normal(0.0, 0.3, (n, 6)),
    }
    return blocks


def default_camera(width=32, height=32, eye=(1.9, 0.5, 0.8), fx=None):
    return Camera.looking_at(eye=np.array(eye, dtype=np.float64),
                             target=np.zeros(3),
                             fx=float(fx if fx is not None else width),
                             width=width, height=height)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # echo the acceptance verdicts after the captured-output noise
    try:
        from test_acceptance import REPORT
    except Exception:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
