"""Side-by-side timing of the twin kernel backends.

The hot loops (splat rasterization forward/backward, shadow transmittance
rays) exist twice: a numba @njit version and a vectorized numpy fallback
selected at import time by SPLATLIGHT_NUMBA. This harness times both in
one process by calling the numpy reference entry points directly, and
cross-checks that the two paths agree to near machine precision on the
benchmark inputs.

Run from the repository root:

    python3 -m benchmarks.bench_kernels        # or: splatlight bench
"""
import time

import numpy as np

from splatlight.backend import USE_NUMBA, backend_name
from splatlight.geometry import conic_and_radius
from splatlight.rasterizer import (backward, backward_reference, forward,
                                   forward_reference, sort_order)
from splatlight.shadow import _transmittance_np, transmittance_many

H = W = 64
N_SPLATS = 2_000
N_RAYS = 4_096
N_OCCLUDERS = 500


def _best_of(fn, repeats=5, warmup=1):
    for _ in range(warmup):
        fn()
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _splat_inputs(rng):
    means2d = np.column_stack([rng.uniform(-6.0, W + 6.0, N_SPLATS),
                               rng.uniform(-6.0, H + 6.0, N_SPLATS)])
    a = rng.normal(0.0, 1.4, (N_SPLATS, 2, 2))
    cov = a @ a.transpose(0, 2, 1) + 0.3 * np.eye(2)
    conics, radii = conic_and_radius(cov)
    opac = rng.uniform(0.05, 0.95, N_SPLATS)
    colors = rng.uniform(0.0, 1.0, (N_SPLATS, 3))
    depths = rng.uniform(0.5, 6.0, N_SPLATS)
    order = sort_order(depths, means2d, radii, H, W)
    bg = np.array([0.0, 0.0, 0.0])
    return order, means2d, conics, radii.astype(np.float64), opac, colors, bg


def _ray_inputs(rng):
    light = np.array([0.0, 0.0, 5.0])
    targets = rng.uniform(-0.6, 0.6, (N_RAYS, 3))
    recv_ids = rng.integers(0, N_OCCLUDERS, N_RAYS)
    means = rng.uniform(-0.6, 0.6, (N_OCCLUDERS, 3))
    a = rng.normal(0.0, 0.08, (N_OCCLUDERS, 3, 3))
    covs = a @ a.transpose(0, 2, 1) + 1e-3 * np.eye(3)
    inv_covs = np.linalg.inv(covs)
    opac = rng.uniform(0.1, 0.9, N_OCCLUDERS)
    return light, targets, recv_ids, means, inv_covs, opac


def _row(label, t_np, t_active):
    if t_active is None:
        print(f"{label:34s} {t_np * 1e3:9.2f} ms        (numpy only)")
    else:
        print(f"{label:34s} {t_np * 1e3:9.2f} ms {t_active * 1e3:9.2f} ms "
              f"{t_np / t_active:7.1f}x")


def main():
    rng = np.random.default_rng(0)
    print(f"backend: {backend_name()}  "
          f"(set SPLATLIGHT_NUMBA=0 to force the numpy fallback)\n")
    header = f"{'kernel':34s} {'numpy':>12s} {'numba':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))

    order, means2d, conics, radii, opac, colors, bg = _splat_inputs(rng)
    img_ref, t_end_ref, _ = forward_reference(order, means2d, conics, radii,
                                              opac, colors, bg, H, W)
    g_img = rng.uniform(-1.0, 1.0, (H, W, 3))

    t_np = _best_of(lambda: forward_reference(order, means2d, conics, radii,
                                              opac, colors, bg, H, W))
    t_nb = None
    if USE_NUMBA:
        img, t_end, _ = forward(order, means2d, conics, radii, opac, colors,
                                bg, H, W)
        drift = float(np.max(np.abs(img - img_ref)))
        assert drift < 1e-12, f"forward backends disagree by {drift:.2e}"
        t_nb = _best_of(lambda: forward(order, means2d, conics, radii, opac,
                                        colors, bg, H, W))
    _row(f"raster forward {H}x{W}, {N_SPLATS} splats", t_np, t_nb)

    t_np = _best_of(lambda: backward_reference(
        g_img, order, means2d, conics, radii, opac, colors, bg,
        t_end_ref, img_ref))
    t_nb = None
    if USE_NUMBA:
        ref = backward_reference(g_img, order, means2d, conics, radii, opac,
                                 colors, bg, t_end_ref, img_ref)
        got = backward(g_img, order, means2d, conics, radii, opac, colors,
                       bg, t_end_ref, img_ref)
        drift = max(float(np.max(np.abs(a - b))) for a, b in zip(got, ref))
        assert drift < 1e-9, f"backward backends disagree by {drift:.2e}"
        t_nb = _best_of(lambda: backward(g_img, order, means2d, conics, radii,
                                         opac, colors, bg, t_end_ref, img_ref))
    _row("raster backward", t_np, t_nb)

    light, targets, recv_ids, means, inv_covs, op = _ray_inputs(rng)
    t_np = _best_of(lambda: _transmittance_np(light, targets, recv_ids, means,
                                              inv_covs, op, 1e-3))
    t_nb = None
    if USE_NUMBA:
        ref = _transmittance_np(light, targets, recv_ids, means, inv_covs,
                                op, 1e-3)
        got = transmittance_many(light, targets, recv_ids, means, inv_covs, op)
        drift = float(np.max(np.abs(got - ref)))
        assert drift < 1e-12, f"transmittance backends disagree by {drift:.2e}"
        t_nb = _best_of(lambda: transmittance_many(light, targets, recv_ids,
                                                   means, inv_covs, op))
    _row(f"shadow rays {N_RAYS}x{N_OCCLUDERS}", t_np, t_nb)

    # one full training step under the active backend, for scale
    from splatlight.config import Config
    from splatlight.dataset import make_synthetic
    from splatlight.scene import Scene
    from splatlight.trainer import Trainer

    _, frames = make_synthetic(seed=0, n_gaussians=100, n_frames=4,
                               image_size=64)
    cfg = Config(n_gaussians=100, total_iters=5_000, scale_schedule=True)
    trainer = Trainer(Scene.init(n=100, seed=1), frames, cfg)
    it = [0]

    def step():
        trainer.step(4_999, frame_idx=it[0] % len(frames))
        it[0] += 1

    t_step = _best_of(step, repeats=8, warmup=2)
    print(f"\ntrain step (all terms, 64x64, 100 gaussians, "
          f"backend={backend_name()}): {t_step * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
