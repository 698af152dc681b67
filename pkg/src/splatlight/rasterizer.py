"""Front-to-back alpha compositing and the fused splat kernel.

`composite` is the pure per-pixel contract: exact telescoping product with
early termination (a contribution enters iff the transmittance before it is
still >= 1e-4). The image kernels apply the same rule per pixel, restricted
to each splat's 3-sigma bounding box, and exist in two backends selected at
import time: a vectorized numpy fallback (loop over sorted Gaussians,
whole-image arrays) and a numba per-pixel walk parallelized over rows.
Both share one arithmetic order per pixel, so results agree to the last
few ulps; the backward is a hand-written suffix walk exposed to the tape
as a single fused node.
"""
from __future__ import annotations

import numpy as np

from . import tape as T
from .backend import USE_NUMBA

TERM_EPS = 1e-4  # stop including contributions once transmittance < this


def composite(colors, alphas, background=(0.0, 0.0, 0.0)):
    """Front-to-back alpha blending of a depth-sorted contribution list.

    colors: (n, 3), alphas: (n,) in [0, 1]. Returns (rgb, weights, T_final)
    where weights[i] = T_i * alpha_i (zero for terminated entries).
    """
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    alphas = np.asarray(alphas, dtype=np.float64).reshape(-1)
    bg = np.asarray(background, dtype=np.float64)
    rgb = np.zeros(3)
    weights = np.zeros(len(alphas))
    t = 1.0
    for i in range(len(alphas)):
        if t < TERM_EPS:
            break
        w = t * alphas[i]
        weights[i] = w
        rgb = rgb + w * colors[i]
        t = t * (1.0 - alphas[i])
    return rgb + t * bg, weights, t


def sort_order(depths, means2d, radii, height, width, near=0.2):
    """Global front-to-back order: camera-z ascending, Gaussian id tiebreak.

    Culls splats behind the near plane or with no bbox overlap with the image.
    """
    depths = np.asarray(depths)
    u, v = means2d[:, 0], means2d[:, 1]
    keep = (depths > near) & (radii > 0)
    keep &= (u + radii >= 0) & (u - radii <= width) & (v + radii >= 0) & (v - radii <= height)
    ids = np.nonzero(keep)[0]
    return ids[np.lexsort((ids, depths[ids]))].astype(np.int64)


# ---------------------------------------------------------------------------
# numpy kernels
# ---------------------------------------------------------------------------

def _forward_np(order, means2d, conics, radii, opac, colors, bg, height, width):
    py, px = np.mgrid[0:height, 0:width].astype(np.float64) + 0.5
    img = np.zeros((height, width, 3))
    t = np.ones((height, width))
    n_contrib = np.zeros((height, width), dtype=np.int64)
    for gid in order:
        dx = px - means2d[gid, 0]
        dy = py - means2d[gid, 1]
        r = radii[gid]
        a, b, c = conics[gid, 0], conics[gid, 1], conics[gid, 2]
        power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
        m = (np.abs(dx) <= r) & (np.abs(dy) <= r) & (power <= 0.0) & (t >= TERM_EPS)
        alpha = opac[gid] * np.exp(power)
        tw = np.where(m, t * alpha, 0.0)
        img += tw[..., None] * colors[gid]
        t = np.where(m, t * (1.0 - alpha), t)
        n_contrib += m
    img += t[..., None] * bg
    return img, t, n_contrib


def _backward_np(g_img, order, means2d, conics, radii, opac, colors, bg,
                 t_end, img):
    height, width = t_end.shape
    py, px = np.mgrid[0:height, 0:width].astype(np.float64) + 0.5
    craw = img - t_end[..., None] * bg
    g_means2d = np.zeros_like(means2d)
    g_conics = np.zeros_like(conics)
    g_opac = np.zeros_like(opac)
    g_colors = np.zeros_like(colors)
    g_bg = (g_img * t_end[..., None]).sum(axis=(0, 1))

    t = np.ones((height, width))
    partial = np.zeros((height, width, 3))
    for gid in order:
        dx = px - means2d[gid, 0]
        dy = py - means2d[gid, 1]
        r = radii[gid]
        a, b, c = conics[gid, 0], conics[gid, 1], conics[gid, 2]
        power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
        m = (np.abs(dx) <= r) & (np.abs(dy) <= r) & (power <= 0.0) & (t >= TERM_EPS)
        w = np.exp(power)
        alpha = opac[gid] * w
        tw = np.where(m, t * alpha, 0.0)
        partial = partial + tw[..., None] * colors[gid]
        one_m = 1.0 - alpha
        safe = one_m > 1e-12
        rest = (craw - partial) + t_end[..., None] * bg
        # dC/dalpha_i = T_i c_i - suffix_i / (1 - alpha_i); suffix carries a
        # (1 - alpha_i) factor so the ratio is finite; zero it at saturation
        ratio = np.where(safe[..., None], rest / np.where(safe, one_m, 1.0)[..., None], 0.0)
        g_alpha = np.where(m, (g_img * (t[..., None] * colors[gid] - ratio)).sum(axis=-1), 0.0)
        g_colors[gid] += np.einsum("hwc,hw->c", g_img, tw)
        g_opac[gid] += np.sum(g_alpha * w)
        ga = g_alpha * alpha
        g_conics[gid, 0] += np.sum(ga * (-0.5 * dx * dx))
        g_conics[gid, 1] += np.sum(ga * (-dx * dy))
        g_conics[gid, 2] += np.sum(ga * (-0.5 * dy * dy))
        g_means2d[gid, 0] += np.sum(ga * (a * dx + b * dy))
        g_means2d[gid, 1] += np.sum(ga * (b * dx + c * dy))
        t = np.where(m, t * one_m, t)
    return g_means2d, g_conics, g_opac, g_colors, g_bg


# ---------------------------------------------------------------------------
# numba kernels (compiled only when the backend is enabled)
# ---------------------------------------------------------------------------

if USE_NUMBA:
    from numba import njit, prange
else:  # pragma: no cover - exercised only on the numpy backend
    prange = range

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap


@njit(parallel=True, fastmath=False, cache=True)
def _forward_loop(order, means2d, conics, radii, opac, colors, bg, height, width,
                  img, t_end, n_contrib):
    for i in prange(height):
        py = i + 0.5
        for j in range(width):
            px = j + 0.5
            t = 1.0
            c0 = 0.0
            c1 = 0.0
            c2 = 0.0
            n = 0
            for k in range(order.shape[0]):
                gid = order[k]
                r = radii[gid]
                dx = px - means2d[gid, 0]
                dy = py - means2d[gid, 1]
                if dx > r or dx < -r or dy > r or dy < -r:
                    continue
                a = conics[gid, 0]
                b = conics[gid, 1]
                c = conics[gid, 2]
                power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
                if power > 0.0:
                    continue
                if t < TERM_EPS:
                    break
                alpha = opac[gid] * np.exp(power)
                tw = t * alpha
                c0 += tw * colors[gid, 0]
                c1 += tw * colors[gid, 1]
                c2 += tw * colors[gid, 2]
                t = t * (1.0 - alpha)
                n += 1
            img[i, j, 0] = c0 + t * bg[0]
            img[i, j, 1] = c1 + t * bg[1]
            img[i, j, 2] = c2 + t * bg[2]
            t_end[i, j] = t
            n_contrib[i, j] = n


# backward accumulates into shared per-Gaussian slots; kept serial so
# gradient sums are deterministic run to run
@njit(fastmath=False, cache=True)
def _backward_loop(g_img, order, means2d, conics, radii, opac, colors, bg,
                   t_end, img, g_means2d, g_conics, g_opac, g_colors, g_bg):
    height, width = t_end.shape
    for i in range(height):
        py = i + 0.5
        for j in range(width):
            px = j + 0.5
            g0 = g_img[i, j, 0]
            g1 = g_img[i, j, 1]
            g2 = g_img[i, j, 2]
            te = t_end[i, j]
            g_bg[0] += g0 * te
            g_bg[1] += g1 * te
            g_bg[2] += g2 * te
            craw0 = img[i, j, 0] - te * bg[0]
            craw1 = img[i, j, 1] - te * bg[1]
            craw2 = img[i, j, 2] - te * bg[2]
            t = 1.0
            p0 = 0.0
            p1 = 0.0
            p2 = 0.0
            for k in range(order.shape[0]):
                gid = order[k]
                r = radii[gid]
                dx = px - means2d[gid, 0]
                dy = py - means2d[gid, 1]
                if dx > r or dx < -r or dy > r or dy < -r:
                    continue
                a = conics[gid, 0]
                b = conics[gid, 1]
                c = conics[gid, 2]
                power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
                if power > 0.0:
                    continue
                if t < TERM_EPS:
                    break
                w = np.exp(power)
                alpha = opac[gid] * w
                tw = t * alpha
                p0 += tw * colors[gid, 0]
                p1 += tw * colors[gid, 1]
                p2 += tw * colors[gid, 2]
                one_m = 1.0 - alpha
                if one_m > 1e-12:
                    r0 = ((craw0 - p0) + te * bg[0]) / one_m
                    r1 = ((craw1 - p1) + te * bg[1]) / one_m
                    r2 = ((craw2 - p2) + te * bg[2]) / one_m
                else:
                    r0 = 0.0
                    r1 = 0.0
                    r2 = 0.0
                g_alpha = (g0 * (t * colors[gid, 0] - r0)
                           + g1 * (t * colors[gid, 1] - r1)
                           + g2 * (t * colors[gid, 2] - r2))
                g_colors[gid, 0] += g0 * tw
                g_colors[gid, 1] += g1 * tw
                g_colors[gid, 2] += g2 * tw
                g_opac[gid] += g_alpha * w
                ga = g_alpha * alpha
                g_conics[gid, 0] += ga * (-0.5 * dx * dx)
                g_conics[gid, 1] += ga * (-dx * dy)
                g_conics[gid, 2] += ga * (-0.5 * dy * dy)
                g_means2d[gid, 0] += ga * (a * dx + b * dy)
                g_means2d[gid, 1] += ga * (b * dx + c * dy)
                t = t * one_m


def _forward_kernel(order, means2d, conics, radii, opac, colors, bg, height, width):
    img = np.zeros((height, width, 3))
    t_end = np.ones((height, width))
    n_contrib = np.zeros((height, width), dtype=np.int64)
    _forward_loop(order, means2d, conics, radii, opac, colors, bg,
                  height, width, img, t_end, n_contrib)
    return img, t_end, n_contrib


def _backward_kernel(g_img, order, means2d, conics, radii, opac, colors, bg, t_end, img):
    g_means2d = np.zeros_like(means2d)
    g_conics = np.zeros_like(conics)
    g_opac = np.zeros_like(opac)
    g_colors = np.zeros_like(colors)
    g_bg = np.zeros(3)
    _backward_loop(g_img, order, means2d, conics, radii, opac, colors, bg,
                   t_end, img, g_means2d, g_conics, g_opac, g_colors, g_bg)
    return g_means2d, g_conics, g_opac, g_colors, g_bg


if USE_NUMBA:
    forward = _forward_kernel
    backward = _backward_kernel
else:
    forward = _forward_np
    backward = _backward_np


def forward_reference(order, means2d, conics, radii, opac, colors, bg, height, width):
    """Backend-independent forward (always the numpy path), for equivalence tests."""
    return _forward_np(order, means2d, conics, radii, opac, colors, bg, height, width)


def backward_reference(g_img, order, means2d, conics, radii, opac, colors, bg, t_end, img):
    return _backward_np(g_img, order, means2d, conics, radii, opac, colors, bg, t_end, img)


# ---------------------------------------------------------------------------
# tape integration
# ---------------------------------------------------------------------------

def rasterize_t(means2d, conics, opac, colors, background, order, radii, height, width):
    """Fused splat node: image-valued output with a hand-written backward.

    means2d (N,2), conics (N,3), opac (N,), colors (N,3), background (3,)
    are tape nodes; order, radii are constants. Returns (image node,
    t_end array, n_contrib array).
    """
    tp = means2d.tape
    order = np.ascontiguousarray(order, dtype=np.int64)
    radii = np.ascontiguousarray(radii, dtype=np.float64)
    img, t_end, n_contrib = forward(order, means2d.value, conics.value, radii,
                                    opac.value, colors.value, background.value,
                                    height, width)

    def vjp(g):
        return backward(np.ascontiguousarray(g), order, means2d.value,
                        conics.value, radii, opac.value, colors.value,
                        background.value, t_end, img)

    node = T.custom_op(tp, img, (means2d, conics, opac, colors, background), vjp)
    return node, t_end, n_contrib
