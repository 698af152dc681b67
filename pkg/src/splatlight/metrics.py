"""PSNR and SSIM for [0, 1] float images.

SSIM follows the standard reference: 11x11 Gaussian window (sigma 1.5),
K1 = 0.01, K2 = 0.03, dynamic range 1, weighted (not sample) covariance,
and the mean taken over windows fully inside the image. RGB inputs are
converted to grayscale by luminance first.
"""
from __future__ import annotations

import numpy as np

SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11-tap window
K1, K2 = 0.01, 0.03

LUMA = np.array([0.2125, 0.7154, 0.0721])


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    """10 log10(1 / MSE); identical images report +inf."""
    a, b = _check_pair(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def to_gray(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return img @ LUMA
    return img


def _gaussian_kernel():
    x = np.arange(-SSIM_RADIUS, SSIM_RADIUS + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    return k / k.sum()


def _filter_valid(img, kernel):
    """Separable valid-mode Gaussian filter (windows fully inside)."""
    from numpy.lib.stride_tricks import sliding_window_view
    win = 2 * SSIM_RADIUS + 1
    out = (sliding_window_view(img, win, axis=0) * kernel).sum(-1)
    out = (sliding_window_view(out, win, axis=1) * kernel).sum(-1)
    return out


def ssim(a, b):
    """Mean structural similarity of the luminance channels."""
    a, b = _check_pair(a, b)
    x = to_gray(a)
    y = to_gray(b)
    win = 2 * SSIM_RADIUS + 1
    if min(x.shape) < win:
        raise ValueError(f"images smaller than the {win}x{win} SSIM window")
    k = _gaussian_kernel()
    ux = _filter_valid(x, k)
    uy = _filter_valid(y, k)
    uxx = _filter_valid(x * x, k)
    uyy = _filter_valid(y * y, k)
    uxy = _filter_valid(x * y, k)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    c1 = K1 ** 2
    c2 = K2 ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return float(s.mean())
