"""Two-stage shadows: analytic coarse visibility, neural refinement.

Stage 1 casts one ray per covered pixel from the light to the receiver's
splat-plane point and accumulates occluder opacity with the peak-response
approximation: each occluder contributes its density at the ray's
closest-approach point, restricted to the open segment between light and
target with a 1e-3 world-unit guard band at both ends (the receiver is
also excluded by id). Per-ray transmittances are averaged with the
receiver's own projected density as weights. The whole stage is treated
as stop-gradient; only the stage-2 refiner (a 3-layer MLP residual on the
logit of the coarse value) is differentiated.
"""
from __future__ import annotations

import numpy as np

from . import tape as T
from .backend import USE_NUMBA
from .geometry import camera_ray_dir, normalize_np
from .mlp import MLP, pe_dim, positional_encoding, positional_encoding_t

GUARD = 1e-3
MAX_RAYS_DEFAULT = 64
PE_BANDS = 3
REFINE_INPUT = 2 * pe_dim(3, PE_BANDS) + 1 + 6  # 49
REFINE_HIDDEN = 32
VHAT_CLIP = 1e-6


def ray_transmittance(light_pos, target_point, means, inv_covs, opacities,
                      exclude=-1, guard=GUARD):
    """Transmittance along one light ray; reference-grade numpy, used by tests."""
    o = np.asarray(light_pos, dtype=np.float64)
    seg = np.asarray(target_point, dtype=np.float64) - o
    t_max = np.linalg.norm(seg)
    u = seg / t_max
    v = 1.0
    for k in range(len(means)):
        if k == exclude:
            continue
        q = inv_covs[k]
        w = means[k] - o
        uq = u @ q
        denom = uq @ u
        t_star = (uq @ w) / denom
        if t_star <= guard or t_star >= t_max - guard:
            continue
        d = t_star * u - w
        m2 = d @ q @ d
        alpha = opacities[k] * np.exp(-0.5 * m2)
        v *= 1.0 - alpha
    return v


# ---------------------------------------------------------------------------
# batched stage-1 kernels
# ---------------------------------------------------------------------------

def _transmittance_np(light, targets, recv_ids, means, inv_covs, opac, guard):
    o = light
    seg = targets - o
    t_max = np.sqrt(np.sum(seg * seg, axis=-1))
    u = seg / t_max[:, None]
    v = np.ones(len(targets))
    for k in range(len(means)):
        q = inv_covs[k]
        w = means[k] - o
        uq = u @ q
        denom = np.sum(uq * u, axis=-1)
        t_star = (uq @ w) / denom
        valid = (t_star > guard) & (t_star < t_max - guard) & (recv_ids != k)
        d = t_star[:, None] * u - w
        m2 = np.sum((d @ q) * d, axis=-1)
        alpha = opac[k] * np.exp(-0.5 * m2)
        v *= np.where(valid, 1.0 - alpha, 1.0)
    return v


if USE_NUMBA:
    from numba import njit, prange

    @njit(parallel=True, fastmath=False, cache=True)
    def _transmittance_loop(light, targets, recv_ids, means, inv_covs, opac,
                            guard, out):
        n_rays = targets.shape[0]
        n_g = means.shape[0]
        for i in prange(n_rays):
            dx = targets[i, 0] - light[0]
            dy = targets[i, 1] - light[1]
            dz = targets[i, 2] - light[2]
            t_max = np.sqrt(dx * dx + dy * dy + dz * dz)
            ux = dx / t_max
            uy = dy / t_max
            uz = dz / t_max
            v = 1.0
            for k in range(n_g):
                if k == recv_ids[i]:
                    continue
                q = inv_covs[k]
                wx = means[k, 0] - light[0]
                wy = means[k, 1] - light[1]
                wz = means[k, 2] - light[2]
                uqx = ux * q[0, 0] + uy * q[1, 0] + uz * q[2, 0]
                uqy = ux * q[0, 1] + uy * q[1, 1] + uz * q[2, 1]
                uqz = ux * q[0, 2] + uy * q[1, 2] + uz * q[2, 2]
                denom = uqx * ux + uqy * uy + uqz * uz
                t_star = (uqx * wx + uqy * wy + uqz * wz) / denom
                if t_star <= guard or t_star >= t_max - guard:
                    continue
                ddx = t_star * ux - wx
                ddy = t_star * uy - wy
                ddz = t_star * uz - wz
                m0 = ddx * q[0, 0] + ddy * q[1, 0] + ddz * q[2, 0]
                m1 = ddx * q[0, 1] + ddy * q[1, 1] + ddz * q[2, 1]
                m2c = ddx * q[0, 2] + ddy * q[1, 2] + ddz * q[2, 2]
                m2 = m0 * ddx + m1 * ddy + m2c * ddz
                alpha = opac[k] * np.exp(-0.5 * m2)
                v *= 1.0 - alpha
            out[i] = v

    def transmittance_many(light, targets, recv_ids, means, inv_covs, opac,
                           guard=GUARD):
        out = np.empty(len(targets))
        _transmittance_loop(np.ascontiguousarray(light, dtype=np.float64),
                            np.ascontiguousarray(targets, dtype=np.float64),
                            np.ascontiguousarray(recv_ids, dtype=np.int64),
                            np.ascontiguousarray(means, dtype=np.float64),
                            np.ascontiguousarray(inv_covs, dtype=np.float64),
                            np.ascontiguousarray(opac, dtype=np.float64),
                            guard, out)
        return out
else:
    def transmittance_many(light, targets, recv_ids, means, inv_covs, opac,
                           guard=GUARD):
        return _transmittance_np(np.asarray(light, dtype=np.float64),
                                 np.asarray(targets, dtype=np.float64),
                                 np.asarray(recv_ids, dtype=np.int64),
                                 np.asarray(means, dtype=np.float64),
                                 np.asarray(inv_covs, dtype=np.float64),
                                 np.asarray(opac, dtype=np.float64), guard)


def footprint_pixels(mean2d, radius, height, width, max_rays=MAX_RAYS_DEFAULT,
                     exact=False):
    """Pixel centers in the receiver's clipped 3-sigma bbox.

    Subsampled on an even lattice (at most ~max_rays points, stratified by
    stride) unless exact=True, which returns every covered pixel.
    """
    x0 = max(int(np.floor(mean2d[0] - radius + 0.5)), 0)
    x1 = min(int(np.ceil(mean2d[0] + radius - 0.5)), width - 1)
    y0 = max(int(np.floor(mean2d[1] - radius + 0.5)), 0)
    y1 = min(int(np.ceil(mean2d[1] + radius - 0.5)), height - 1)
    if x1 < x0 or y1 < y0:
        return np.empty(0), np.empty(0)
    xs = np.arange(x0, x1 + 1)
    ys = np.arange(y0, y1 + 1)
    if not exact:
        side = max(int(np.floor(np.sqrt(max_rays))), 1)
        if len(xs) > side:
            xs = xs[np.linspace(0, len(xs) - 1, side).round().astype(int)]
        if len(ys) > side:
            ys = ys[np.linspace(0, len(ys) - 1, side).round().astype(int)]
    u, v = np.meshgrid(xs + 0.5, ys + 0.5)
    return u.ravel(), v.ravel()


def splat_plane_points(cam_pos, c2w, fx, fy, cx, cy, center, pix_u, pix_v):
    """Intersect pixel camera rays with the receiver's splat plane.

    The plane passes through the Gaussian center, normal to the view
    direction from the camera to that center.
    """
    n = normalize_np(center - cam_pos)
    d = camera_ray_dir(c2w, fx, fy, cx, cy, pix_u, pix_v)
    denom = d @ n
    t = ((center - cam_pos) @ n) / denom
    return cam_pos + t[:, None] * d


def coarse_visibility(light_pos, means, inv_covs, opacities, means2d, conics,
                      radii, order, cam_pos, c2w, fx, fy, cx, cy, height, width,
                      max_rays=MAX_RAYS_DEFAULT, exact=False, guard=GUARD):
    """Density-weighted mean ray transmittance per Gaussian; culled ones keep v_hat = 1.

    Returns (v_hat (N,), degenerate_mask (N,)) where the mask marks
    receivers whose footprint carried zero density.
    """
    n = len(means)
    vhat = np.ones(n)
    degenerate = np.zeros(n, dtype=bool)

    all_u, all_v, all_rho, all_recv = [], [], [], []
    for gid in order:
        u, v = footprint_pixels(means2d[gid], radii[gid], height, width,
                                max_rays=max_rays, exact=exact)
        if len(u) == 0:
            degenerate[gid] = True
            continue
        dx = u - means2d[gid, 0]
        dy = v - means2d[gid, 1]
        a, b, c = conics[gid]
        power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
        rho = opacities[gid] * np.exp(np.minimum(power, 0.0))
        all_u.append(u)
        all_v.append(v)
        all_rho.append(rho)
        all_recv.append(np.full(len(u), gid, dtype=np.int64))
    if not all_u:
        return vhat, degenerate

    recv = np.concatenate(all_recv)
    rho = np.concatenate(all_rho)
    pix_u = np.concatenate(all_u)
    pix_v = np.concatenate(all_v)

    targets = np.empty((len(recv), 3))
    for gid in order:
        sel = recv == gid
        if not np.any(sel):
            continue
        targets[sel] = splat_plane_points(cam_pos, c2w, fx, fy, cx, cy,
                                          means[gid], pix_u[sel], pix_v[sel])

    v_ray = transmittance_many(light_pos, targets, recv, means, inv_covs,
                               opacities, guard=guard)

    num = np.bincount(recv, weights=rho * v_ray, minlength=n)
    den = np.bincount(recv, weights=rho, minlength=n)
    has = den > 0.0
    vhat[has] = num[has] / den[has]
    for gid in order:
        if not has[gid]:
            degenerate[gid] = True
    return vhat, degenerate


# ---------------------------------------------------------------------------
# stage 2: neural refinement
# ---------------------------------------------------------------------------

class ShadowRefiner:
    """Theta_shad: S = sigmoid(logit(clamp(v_hat)) + net(x, w_i, v_hat, m)).

    Zero-initialized final layer makes the refiner exactly the identity on
    v_hat at the start of training.
    """

    def __init__(self, rng=None, prefix="shadow_mlp"):
        sizes = (REFINE_INPUT, REFINE_HIDDEN, REFINE_HIDDEN, 1)
        self.mlp = MLP(prefix, sizes, rng, zero_last=True)

    @property
    def weights(self):
        return self.mlp.weights

    @staticmethod
    def _logit(vhat):
        v = np.clip(vhat, VHAT_CLIP, 1.0 - VHAT_CLIP)
        return np.log(v / (1.0 - v))

    def refine_np(self, weights, x, wi, vhat, m):
        inp = np.concatenate([positional_encoding(x, PE_BANDS),
                              positional_encoding(wi, PE_BANDS),
                              np.asarray(vhat, dtype=np.float64)[..., None], m], axis=-1)
        out = self.mlp.forward_np(weights, inp)[..., 0]
        return 1.0 / (1.0 + np.exp(-(self._logit(vhat) + out)))

    def refine_t(self, leaves, x, wi, vhat, m):
        """x, wi, m are nodes; vhat is a plain array (stage 1 is stop-grad)."""
        tp = x.tape
        vhat = np.asarray(vhat, dtype=np.float64)
        vnode = tp.constant(vhat[:, None])
        inp = T.concat([positional_encoding_t(x, PE_BANDS),
                        positional_encoding_t(wi, PE_BANDS), vnode, m], axis=-1)
        out = T.getitem(self.mlp.forward_t(leaves, inp), (slice(None), 0))
        base = tp.constant(self._logit(vhat))
        return T.sigmoid(T.add(base, out))
