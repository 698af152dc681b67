"""Small MLPs and positional encodings shared by the neural heads.

Weights live in flat name -> array dicts owned by the scene so the
optimizer and checkpoint code see every learnable block the same way.
"""
from __future__ import annotations

import numpy as np

from . import tape as T


def positional_encoding(v, bands):
    """PE(v) = v followed by (sin(2^k pi v), cos(2^k pi v)), k = 0..bands-1.

    v: (..., d) -> (..., d * (1 + 2 * bands)).
    """
    v = np.asarray(v, dtype=np.float64)
    parts = [v]
    for k in range(bands):
        w = (2.0 ** k) * np.pi * v
        parts.append(np.sin(w))
        parts.append(np.cos(w))
    return np.concatenate(parts, axis=-1)


def positional_encoding_t(v, bands):
    parts = [v]
    for k in range(bands):
        w = T.mul(v, (2.0 ** k) * np.pi)
        parts.append(T.sin(w))
        parts.append(T.cos(w))
    return T.concat(parts, axis=-1)


def pe_dim(d, bands):
    return d * (1 + 2 * bands)


class MLP:
    """ReLU MLP with fan-in uniform init and named parameter blocks.

    sizes = (in, h1, ..., out). `zero_last` zeroes the final layer so the
    network starts as the identity around its output bias (used by the
    shadow refiner); otherwise only the final bias is zeroed so squashed
    outputs start at interval midpoints.
    """

    def __init__(self, prefix, sizes, rng=None, zero_last=False):
        self.prefix = prefix
        self.sizes = tuple(int(s) for s in sizes)
        self.n_layers = len(self.sizes) - 1
        self.weights: dict[str, np.ndarray] = {}
        if rng is None:
            return
        for i in range(self.n_layers):
            fan_in, fan_out = self.sizes[i], self.sizes[i + 1]
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = np.zeros(fan_out)
            if i < self.n_layers - 1:
                b = rng.uniform(-bound, bound, size=fan_out)
            if zero_last and i == self.n_layers - 1:
                w = np.zeros((fan_in, fan_out))
            self.weights[f"{prefix}.w{i}"] = w
            self.weights[f"{prefix}.b{i}"] = b

    def param_names(self):
        return list(self.weights)

    def forward_t(self, leaves, x):
        """Run on a (B, in) node given the tape leaves for this block."""
        h = x
        for i in range(self.n_layers):
            h = T.add(T.matmul(h, leaves[f"{self.prefix}.w{i}"]),
                      leaves[f"{self.prefix}.b{i}"])
            if i < self.n_layers - 1:
                h = T.relu(h)
        return h

    def forward_np(self, weights, x):
        """Plain-numpy twin of forward_t (reference and service paths)."""
        h = np.asarray(x, dtype=np.float64)
        for i in range(self.n_layers):
            h = h @ weights[f"{self.prefix}.w{i}"] + weights[f"{self.prefix}.b{i}"]
            if i < self.n_layers - 1:
                h = np.maximum(h, 0.0)
        return h

    def validate(self, weights):
        """Checkpoint load guard: every block present with the right shape."""
        for i in range(self.n_layers):
            wname, bname = f"{self.prefix}.w{i}", f"{self.prefix}.b{i}"
            for name, wanted in ((wname, (self.sizes[i], self.sizes[i + 1])),
                                 (bname, (self.sizes[i + 1],))):
                if name not in weights:
                    raise ValueError(f"missing MLP block {name!r}")
                if tuple(weights[name].shape) != wanted:
                    raise ValueError(
                        f"{name!r} has shape {weights[name].shape}, expected {wanted}")
