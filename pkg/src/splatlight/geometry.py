"""Rotations, covariance assembly, camera models and EWA projection.

Every differentiable routine exists twice: a plain-numpy version used by
the stop-gradient kernels, oracles and loaders, and a `_t` suffixed tape
version used inside the training forward pass. The two are kept
line-for-line parallel so a value mismatch is a bug, not a convention
difference.

Conventions: quaternions are (w, x, y, z) and normalized on read; cameras
follow OpenCV axes (x right, y down, z forward) with pixel coordinates
u = fx X/Z + cx, v = fy Y/Z + cy. Loaders convert OpenGL-style
camera-to-world matrices by negating the y and z basis columns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape as T

GL_TO_CV = np.diag([1.0, -1.0, -1.0, 1.0])

# low-pass floor added to projected 2x2 covariances, in pixel^2
COV2D_FLOOR = 0.3


@dataclass
class Camera:
    """OpenCV-convention pinhole camera."""
    w2c: np.ndarray  # (4, 4) world-to-camera
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        self.w2c = np.asarray(self.w2c, dtype=np.float64)
        r = self.w2c[:3, :3]
        if not (np.allclose(r @ r.T, np.eye(3), atol=1e-5) and self.fx > 0 and self.fy > 0):
            raise ValueError("camera rotation not orthonormal or focal lengths invalid")

    @property
    def c2w(self):
        return w2c_from_c2w(self.w2c)  # inversion is an involution for rigid transforms

    @property
    def position(self):
        return -self.w2c[:3, :3].T @ self.w2c[:3, 3]

    @classmethod
    def looking_at(cls, eye, target, fx, width, height, up=(0.0, 0.0, 1.0)):
        c2w = look_at(eye, target, up)
        return cls(w2c=w2c_from_c2w(c2w), fx=fx, fy=fx,
                   cx=width / 2.0, cy=height / 2.0, width=width, height=height)


# ---------------------------------------------------------------------------
# numpy versions
# ---------------------------------------------------------------------------

def normalize_np(v, axis=-1, eps=1e-12):
    n = np.sqrt(np.maximum(np.sum(v * v, axis=axis, keepdims=True), eps))
    return v / n


def quat_to_rot(q):
    """(..., 4) wxyz quaternions to (..., 3, 3) rotation matrices."""
    q = normalize_np(np.asarray(q, dtype=np.float64))
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def build_cov3d(log_scales, quats):
    """Sigma = R S S^T R^T from log-scales and quaternions."""
    R = quat_to_rot(quats)
    M = R * np.exp(log_scales)[..., None, :]
    return M @ np.swapaxes(M, -1, -2)


def build_inv_cov3d(log_scales, quats):
    """Sigma^-1 = R diag(exp(-2 log s)) R^T, exact inverse of build_cov3d."""
    R = quat_to_rot(quats)
    return (R * np.exp(-2.0 * np.asarray(log_scales))[..., None, :]) @ np.swapaxes(R, -1, -2)


def rodrigues(omega):
    """Axis-angle (3,) to rotation matrix, Taylor-safe near zero."""
    omega = np.asarray(omega, dtype=np.float64)
    t2 = float(omega @ omega)
    K = np.array([[0.0, -omega[2], omega[1]],
                  [omega[2], 0.0, -omega[0]],
                  [-omega[1], omega[0], 0.0]])
    if t2 < 1e-16:
        return np.eye(3) + K + 0.5 * (K @ K)
    t = np.sqrt(t2)
    return np.eye(3) + (np.sin(t) / t) * K + ((1 - np.cos(t)) / t2) * (K @ K)


def look_at(eye, target, up=(0.0, 0.0, 1.0)):
    """Camera-to-world matrix (OpenCV axes) looking from eye to target."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = normalize_np(np.asarray(target, dtype=np.float64) - eye)
    right = normalize_np(np.cross(fwd, np.asarray(up, dtype=np.float64)))
    down = np.cross(fwd, right)
    c2w = np.eye(4)
    c2w[:3, 0], c2w[:3, 1], c2w[:3, 2], c2w[:3, 3] = right, down, fwd, eye
    return c2w


def w2c_from_c2w(c2w):
    R = c2w[:3, :3]
    t = c2w[:3, 3]
    w2c = np.eye(4)
    w2c[:3, :3] = R.T
    w2c[:3, 3] = -R.T @ t
    return w2c


def transform_points(mat4, pts):
    return pts @ mat4[:3, :3].T + mat4[:3, 3]


def ewa_project(means_cam, cov3d, Wrot, fx, fy):
    """Project world covariances to pixel space, + low-pass floor.

    means_cam: (N, 3) camera-space centers, Wrot: (3, 3) world-to-camera
    rotation. Returns (N, 2, 2).
    """
    x, y, z = means_cam[:, 0], means_cam[:, 1], means_cam[:, 2]
    J = np.zeros((len(means_cam), 2, 3))
    J[:, 0, 0] = fx / z
    J[:, 0, 2] = -fx * x / (z * z)
    J[:, 1, 1] = fy / z
    J[:, 1, 2] = -fy * y / (z * z)
    Tm = J @ Wrot
    cov2d = Tm @ cov3d @ np.swapaxes(Tm, -1, -2)
    cov2d[:, 0, 0] += COV2D_FLOOR
    cov2d[:, 1, 1] += COV2D_FLOOR
    return cov2d


def conic_and_radius(cov2d):
    """Invert 2x2 covariances; radius bounds the 3-sigma footprint in pixels."""
    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    inv = 1.0 / det
    conic = np.stack([c * inv, -b * inv, a * inv], axis=-1)
    mid = 0.5 * (a + c)
    lam = mid + np.sqrt(np.maximum(mid * mid - det, 0.1))
    radius = np.ceil(3.0 * np.sqrt(lam))
    return conic, radius


def project_means(means_cam, fx, fy, cx, cy):
    z = means_cam[:, 2]
    u = fx * means_cam[:, 0] / z + cx
    v = fy * means_cam[:, 1] / z + cy
    return np.stack([u, v], axis=-1)


def camera_ray_dir(c2w, fx, fy, cx, cy, u, v):
    """World-space unit direction through pixel (u, v); u, v may be arrays."""
    d_cam = np.stack([(np.asarray(u, dtype=np.float64) - cx) / fx,
                      (np.asarray(v, dtype=np.float64) - cy) / fy,
                      np.ones_like(np.asarray(u, dtype=np.float64))], axis=-1)
    d = d_cam @ c2w[:3, :3].T
    return normalize_np(d)


# ---------------------------------------------------------------------------
# tape versions
# ---------------------------------------------------------------------------

def quat_to_rot_t(q):
    """Tape twin of quat_to_rot for a (N, 4) node."""
    qn = T.normalize(q, axis=-1)
    w = T.getitem(qn, (slice(None), 0))
    x = T.getitem(qn, (slice(None), 1))
    y = T.getitem(qn, (slice(None), 2))
    z = T.getitem(qn, (slice(None), 3))
    two = 2.0

    def m(a, b):
        return T.mul(a, b)

    r00 = T.sub(1.0, T.mul(two, T.add(m(y, y), m(z, z))))
    r01 = T.mul(two, T.sub(m(x, y), m(w, z)))
    r02 = T.mul(two, T.add(m(x, z), m(w, y)))
    r10 = T.mul(two, T.add(m(x, y), m(w, z)))
    r11 = T.sub(1.0, T.mul(two, T.add(m(x, x), m(z, z))))
    r12 = T.mul(two, T.sub(m(y, z), m(w, x)))
    r20 = T.mul(two, T.sub(m(x, z), m(w, y)))
    r21 = T.mul(two, T.add(m(y, z), m(w, x)))
    r22 = T.sub(1.0, T.mul(two, T.add(m(x, x), m(y, y))))
    rows = T.stack([T.stack([r00, r01, r02], axis=-1),
                    T.stack([r10, r11, r12], axis=-1),
                    T.stack([r20, r21, r22], axis=-1)], axis=-2)
    return rows


def build_cov3d_t(log_scales, quats):
    R = quat_to_rot_t(quats)
    S = T.exp(log_scales)
    M = T.mul(R, T.reshape(S, (S.shape[0], 1, 3)))
    return T.matmul(M, T.transpose_last2(M))


def rodrigues_t(omega):
    """Tape exp map for a (3,) node, Taylor branch below 1e-8 angle."""
    t2 = T.dot(omega, omega, axis=-1)
    small = t2.value < 1e-16
    t2s = T.maximum_c(t2, 1e-30)
    th = T.sqrt(t2s)
    # sin(t)/t and (1-cos t)/t^2 with Taylor fallbacks 1 - t^2/6, 1/2 - t^2/24
    a_big = T.div(T.sin(th), th)
    a_small = T.sub(1.0, T.div(t2, 6.0))
    b_big = T.div(T.sub(1.0, T.cos(th)), t2s)
    b_small = T.sub(0.5, T.div(t2, 24.0))
    a = T.where(small, a_small, a_big)
    b = T.where(small, b_small, b_big)
    wx = T.getitem(omega, (0,))
    wy = T.getitem(omega, (1,))
    wz = T.getitem(omega, (2,))
    zero = T.mul(wx, 0.0)
    K = T.stack([T.stack([zero, T.neg(wz), wy], axis=-1),
                 T.stack([wz, zero, T.neg(wx)], axis=-1),
                 T.stack([T.neg(wy), wx, zero], axis=-1)], axis=-2)
    K2 = T.matmul(K, K)
    eye = omega.tape.constant(np.eye(3))
    return T.add(eye, T.add(T.mul(a, K), T.mul(b, K2)))


def ewa_project_t(means_cam, cov3d, Wrot, fx, fy):
    """Tape twin of ewa_project; Wrot may be a node (camera refinement)."""
    x = T.getitem(means_cam, (slice(None), 0))
    y = T.getitem(means_cam, (slice(None), 1))
    z = T.getitem(means_cam, (slice(None), 2))
    zero = T.mul(x, 0.0)
    inv_z = T.div(1.0, z)
    inv_z2 = T.mul(inv_z, inv_z)
    row0 = T.stack([T.mul(fx, inv_z), zero, T.neg(T.mul(fx, T.mul(x, inv_z2)))], axis=-1)
    row1 = T.stack([zero, T.mul(fy, inv_z), T.neg(T.mul(fy, T.mul(y, inv_z2)))], axis=-1)
    J = T.stack([row0, row1], axis=-2)
    Tm = T.matmul(J, Wrot)
    cov2d = T.matmul(T.matmul(Tm, cov3d), T.transpose_last2(Tm))
    floor = means_cam.tape.constant(COV2D_FLOOR * np.eye(2))
    return T.add(cov2d, floor)


def conic_t(cov2d):
    a = T.getitem(cov2d, (slice(None), 0, 0))
    b = T.getitem(cov2d, (slice(None), 0, 1))
    c = T.getitem(cov2d, (slice(None), 1, 1))
    det = T.sub(T.mul(a, c), T.mul(b, b))
    inv = T.div(1.0, det)
    return T.stack([T.mul(c, inv), T.neg(T.mul(b, inv)), T.mul(a, inv)], axis=-1)


def project_means_t(means_cam, fx, fy, cx, cy):
    z = T.getitem(means_cam, (slice(None), 2))
    u = T.add(T.mul(fx, T.div(T.getitem(means_cam, (slice(None), 0)), z)), cx)
    v = T.add(T.mul(fy, T.div(T.getitem(means_cam, (slice(None), 1)), z)), cy)
    return T.stack([u, v], axis=-1)


def transform_points_t(Rnode, tnode, pts):
    """pts (N,3) @ R^T + t with R (3,3) and t (3,) nodes."""
    return T.add(T.matmul(pts, T.transpose_last2(Rnode)), tnode)
