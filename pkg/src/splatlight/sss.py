"""Subsurface scattering: neural parameter field + dipole diffusion profile.

A 6-layer ReLU MLP (hidden 256) maps encoded position, view and light
directions plus the raw normal and per-Gaussian embedding to three
sigmoid-squashed coefficients: sigma_s, sigma_a in [0.05, 2.05] and
r in [0.1, 3.1]. The dipole's virtual-source term deliberately carries
a (sigma_t d_r + 1) factor and a z_r z_v prefix (the form the model was
trained against). `classical=True` substitutes the textbook
z_v (sigma_t d_v + 1) form for comparison.
"""
from __future__ import annotations

import numpy as np

from . import tape as T
from .mlp import MLP, pe_dim, positional_encoding, positional_encoding_t

ETA_DEFAULT = 1.3
SIGMA_LO, SIGMA_SPAN = 0.05, 2.0
R_LO, R_SPAN = 0.1, 3.0
PE_BANDS = 4
INPUT_DIM = 3 * pe_dim(3, PE_BANDS) + 3 + 6  # 90
HIDDEN = 256
N_LAYERS = 6


def fresnel_diffuse_reflectance(eta):
    return -1.440 / eta ** 2 + 0.710 / eta + 0.668 + 0.0636 * eta


def dipole_boundary(eta):
    f_dr = fresnel_diffuse_reflectance(eta)
    return (1.0 + f_dr) / (1.0 - f_dr)


def dipole_profile(sigma_s, sigma_a, r, eta=ETA_DEFAULT, classical=False):
    """Scalar diffusion profile f_sss(r); inputs broadcast elementwise."""
    sigma_s = np.asarray(sigma_s, dtype=np.float64)
    sigma_a = np.asarray(sigma_a, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    sigma_t = sigma_s + sigma_a
    albedo = sigma_s / sigma_t
    a_bc = dipole_boundary(eta)
    z_r = 1.0 / sigma_t
    z_v = z_r * (1.0 + 4.0 * a_bc / 3.0)
    d_r = np.sqrt(r * r + z_r * z_r)
    d_v = np.sqrt(r * r + z_v * z_v)
    term1 = z_r * (sigma_t * d_r + 1.0) * np.exp(-sigma_t * d_r) / d_r ** 3
    if classical:
        term2 = z_v * (sigma_t * d_v + 1.0) * np.exp(-sigma_t * d_v) / d_v ** 3
    else:
        term2 = z_r * z_v * (sigma_t * d_r + 1.0) * np.exp(-sigma_t * d_v) / d_v ** 3
    return albedo / (4.0 * np.pi) * (term1 + term2)


def dipole_profile_t(sigma_s, sigma_a, r, eta=ETA_DEFAULT, classical=False):
    """Tape twin of dipole_profile."""
    sigma_t = T.add(sigma_s, sigma_a)
    albedo = T.div(sigma_s, sigma_t)
    a_bc = dipole_boundary(eta)
    z_r = T.div(1.0, sigma_t)
    z_v = T.mul(z_r, 1.0 + 4.0 * a_bc / 3.0)
    d_r = T.sqrt(T.add(T.mul(r, r), T.mul(z_r, z_r)))
    d_v = T.sqrt(T.add(T.mul(r, r), T.mul(z_v, z_v)))
    common1 = T.add(T.mul(sigma_t, d_r), 1.0)
    term1 = T.div(T.mul(T.mul(z_r, common1), T.exp(T.neg(T.mul(sigma_t, d_r)))),
                  T.powc(d_r, 3.0))
    if classical:
        common2 = T.add(T.mul(sigma_t, d_v), 1.0)
        term2 = T.div(T.mul(T.mul(z_v, common2), T.exp(T.neg(T.mul(sigma_t, d_v)))),
                      T.powc(d_v, 3.0))
    else:
        term2 = T.div(T.mul(T.mul(T.mul(z_r, z_v), common1),
                            T.exp(T.neg(T.mul(sigma_t, d_v)))),
                      T.powc(d_v, 3.0))
    return T.mul(T.div(albedo, 4.0 * np.pi), T.add(term1, term2))


class SssField:
    """Neural field Theta_SSS and its evaluation to a scalar f_sss."""

    def __init__(self, rng=None, prefix="sss_mlp"):
        sizes = (INPUT_DIM,) + (HIDDEN,) * (N_LAYERS - 1) + (3,)
        self.mlp = MLP(prefix, sizes, rng)

    @property
    def weights(self):
        return self.mlp.weights

    def _rescale(self, raw):
        sig = 1.0 / (1.0 + np.exp(-raw))
        sigma_s = SIGMA_LO + SIGMA_SPAN * sig[..., 0]
        sigma_a = SIGMA_LO + SIGMA_SPAN * sig[..., 1]
        r = R_LO + R_SPAN * sig[..., 2]
        return sigma_s, sigma_a, r

    def predict_np(self, weights, x, wo, wi, n, m):
        inp = np.concatenate([positional_encoding(x, PE_BANDS),
                              positional_encoding(wo, PE_BANDS),
                              positional_encoding(wi, PE_BANDS), n, m], axis=-1)
        return self._rescale(self.mlp.forward_np(weights, inp))

    def f_sss_np(self, weights, x, wo, wi, n, m, eta=ETA_DEFAULT, classical=False):
        sigma_s, sigma_a, r = self.predict_np(weights, x, wo, wi, n, m)
        return dipole_profile(sigma_s, sigma_a, r, eta=eta, classical=classical)

    def predict_t(self, leaves, x, wo, wi, n, m):
        """x, wo, wi, n, m are (N, .) nodes; returns three (N,) nodes."""
        inp = T.concat([positional_encoding_t(x, PE_BANDS),
                        positional_encoding_t(wo, PE_BANDS),
                        positional_encoding_t(wi, PE_BANDS), n, m], axis=-1)
        raw = T.sigmoid(self.mlp.forward_t(leaves, inp))
        sigma_s = T.add(SIGMA_LO, T.mul(SIGMA_SPAN, T.getitem(raw, (slice(None), 0))))
        sigma_a = T.add(SIGMA_LO, T.mul(SIGMA_SPAN, T.getitem(raw, (slice(None), 1))))
        r = T.add(R_LO, T.mul(R_SPAN, T.getitem(raw, (slice(None), 2))))
        return sigma_s, sigma_a, r

    def f_sss_t(self, leaves, x, wo, wi, n, m, eta=ETA_DEFAULT, classical=False):
        sigma_s, sigma_a, r = self.predict_t(leaves, x, wo, wi, n, m)
        return dipole_profile_t(sigma_s, sigma_a, r, eta=eta, classical=classical)
