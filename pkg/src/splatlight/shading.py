"""Per-Gaussian reflectance terms and their composition.

C_i = (c_d f_d + c_s f_s) * S + c_sss f_sss: the shadow scalar modulates
only the diffuse and specular contributions; scattering is added
unshadowed. The `shadow_on_sss` variant multiplies all three terms by S.
All functions here are tape expressions vectorized over Gaussians;
plain-numpy twins back the oracle tests.
"""
from __future__ import annotations

import numpy as np

from . import tape as T
from .geometry import normalize_np, quat_to_rot, quat_to_rot_t

HALF_VECTOR_EPS = 1e-8

# ablation term masks; D is the full model
COMPOSITIONS = {
    "A": frozenset({"diffuse"}),
    "B": frozenset({"diffuse", "specular"}),
    "C": frozenset({"diffuse", "specular", "sss"}),
    "D": frozenset({"diffuse", "specular", "sss", "shadow"}),
    "E": frozenset({"diffuse", "sss", "shadow"}),
    "F": frozenset({"diffuse", "specular", "shadow"}),
}


# ---------------------------------------------------------------------------
# numpy reference versions
# ---------------------------------------------------------------------------

def normal_np(quats, means, cam_pos):
    n = quat_to_rot(quats)[..., :, 2]
    to_cam = cam_pos - means
    flip = np.sum(n * to_cam, axis=-1) < 0.0
    return np.where(flip[..., None], -n, n)


def diffuse_np(n, wi):
    return np.maximum(np.sum(n * wi, axis=-1), 0.0)


def half_vector_np(wi, wo):
    s = wi + wo
    nrm = np.linalg.norm(s, axis=-1)
    ok = nrm >= HALF_VECTOR_EPS
    h = np.where(ok[..., None], s / np.maximum(nrm, HALF_VECTOR_EPS)[..., None], 0.0)
    return h, ok


def fresnel_np(f0, wo, h):
    coz = np.clip(np.sum(wo * h, axis=-1), 0.0, 1.0)
    return f0 + (1.0 - f0) * (1.0 - coz) ** 5


def asg_np(h, axes_x, axes_y, lam, mu, weights):
    """D(h) = sum_j w_j exp(-lam_j (h.x_j)^2 - mu_j (h.y_j)^2)."""
    hx = h @ axes_x.T
    hy = h @ axes_y.T
    return np.sum(weights * np.exp(-lam * hx * hx - mu * hy * hy), axis=-1)


def specular_np(wi, wo, f0, axes_x, axes_y, lam, mu, weights):
    h, ok = half_vector_np(wi, wo)
    f = fresnel_np(f0, wo, h)
    d = asg_np(h, axes_x, axes_y, lam, mu, weights)
    return np.where(ok, f * d, 0.0)


def shade_np(c_d, c_s, c_sss, f_d, f_s, f_sss, shadow, terms=COMPOSITIONS["D"],
             shadow_on_sss=False):
    f_d = f_d if "diffuse" in terms else np.zeros_like(f_d)
    f_s = f_s if "specular" in terms else np.zeros_like(f_s)
    f_sss = f_sss if "sss" in terms else np.zeros_like(f_sss)
    s = shadow if "shadow" in terms else np.ones_like(shadow)
    lit = c_d * f_d[..., None] + c_s * f_s[..., None]
    sss = c_sss * f_sss[..., None]
    if shadow_on_sss:
        return (lit + sss) * s[..., None]
    return lit * s[..., None] + sss


# ---------------------------------------------------------------------------
# tape versions
# ---------------------------------------------------------------------------

def normal_t(quats, means_val, cam_pos):
    """Rotated local z-axis, sign-flipped toward the camera.

    The flip mask is decided from current values (discrete), gradients flow
    through the chosen sign.
    """
    R = quat_to_rot_t(quats)
    n = T.getitem(R, (slice(None), slice(None), 2))
    to_cam = cam_pos - means_val
    flip = np.sum(n.value * to_cam, axis=-1) < 0.0
    return T.where(flip[:, None], T.neg(n), n)


def diffuse_t(n, wi):
    return T.maximum_c(T.dot(n, wi, axis=-1), 0.0)


def half_vector_t(wi, wo):
    """Unit half vector and its validity mask (constant, value-decided)."""
    s = T.add(wi, wo)
    nrm = np.linalg.norm(s.value, axis=-1)
    ok = nrm >= HALF_VECTOR_EPS
    return T.normalize(s, axis=-1, eps=HALF_VECTOR_EPS ** 2), ok


def fresnel_t(f0, wo, h):
    coz = T.clamp(T.dot(wo, h, axis=-1), 0.0, 1.0)
    base = T.sub(1.0, coz)
    return T.add(f0, T.mul(T.sub(1.0, f0), powc5(base)))


def powc5(x):
    return T.powc(x, 5.0)


def asg_t(h, axes_x, axes_y, lam, mu, weights):
    """h (N,3) node, axes (J,3) nodes, lam/mu/weights (J,) nodes -> (N,)."""
    hx = T.matmul(h, T.transpose_last2(axes_x))
    hy = T.matmul(h, T.transpose_last2(axes_y))
    arg = T.neg(T.add(T.mul(lam, T.mul(hx, hx)), T.mul(mu, T.mul(hy, hy))))
    return T.reduce_sum(T.mul(weights, T.exp(arg)), axis=-1)


def asg_frames_t(lobe_quats):
    """Per-lobe orthonormal frame from quaternions: x, y = first two columns."""
    R = quat_to_rot_t(lobe_quats)
    ax = T.getitem(R, (slice(None), slice(None), 0))
    ay = T.getitem(R, (slice(None), slice(None), 1))
    return ax, ay


def specular_t(wi, wo, f0, axes_x, axes_y, lam, mu, weights):
    h, ok = half_vector_t(wi, wo)
    f = fresnel_t(f0, wo, h)
    d = asg_t(h, axes_x, axes_y, lam, mu, weights)
    fs = T.mul(f, d)
    return T.where(ok, fs, T.mul(fs, 0.0))


def shade_t(c_d, c_s, c_sss, f_d, f_s, f_sss, shadow, terms=COMPOSITIONS["D"],
            shadow_on_sss=False):
    """Blend the four terms into per-Gaussian RGB (N, 3).

    c_* are (N, 3) nodes, f_* and shadow (N,) nodes or None when the term
    is disabled (its slot is simply dropped from the sum).
    """
    def col(c, f):
        return T.mul(c, T.reshape(f, (f.shape[0], 1)))

    parts_lit = []
    if "diffuse" in terms:
        parts_lit.append(col(c_d, f_d))
    if "specular" in terms:
        parts_lit.append(col(c_s, f_s))
    sss = col(c_sss, f_sss) if "sss" in terms else None

    lit = None
    if parts_lit:
        lit = parts_lit[0]
        for p in parts_lit[1:]:
            lit = T.add(lit, p)

    if "shadow" in terms and shadow is not None:
        sview = T.reshape(shadow, (shadow.shape[0], 1))
        if shadow_on_sss and sss is not None:
            total = T.add(lit, sss) if lit is not None else sss
            return T.mul(total, sview)
        if lit is not None:
            lit = T.mul(lit, sview)

    if lit is None and sss is None:
        raise ValueError("empty composition")
    if lit is None:
        return sss
    if sss is None:
        return lit
    return T.add(lit, sss)
