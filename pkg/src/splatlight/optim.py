"""Per-block Adam with the 3DGS-style learning-rate layout.

Rates are assigned by block name (longest prefix wins). Positions decay
exponentially from lr to lr * final_factor across the run. Blocks whose
gradient is identically zero in a step (frozen, or their term inactive)
are skipped entirely: parameters, moments and the block's step counter all
stay untouched, so a freeze window is provably a no-op.
"""
from __future__ import annotations

import numpy as np

DEFAULT_LRS = {
    # desk-scale rate: the usual 1.6e-4 assumes a scene-extent multiplier
    # and a 30k+ schedule with densification; at a few thousand iterations
    # and a fixed Gaussian count, position convergence is the bottleneck
    "positions": 1e-3,
    "log_scales": 5e-3,
    "quats": 1e-3,
    "opacity_raw": 2.5e-2,
    "cd_raw": 2.5e-2,
    "cs_raw": 2.5e-2,
    "csss_raw": 2.5e-2,
    "embed": 1e-3,
    "asg": 1e-3,
    "sss_mlp": 1e-3,
    "shadow_mlp": 1e-3,
    "cam_delta": 1e-4,
    "light_delta": 1e-4,
}
POSITION_LR_FINAL_FACTOR = 0.01


def lr_for(name, lrs):
    best, best_len = None, -1
    for prefix, lr in lrs.items():
        if (name == prefix or name.startswith(prefix + ".")) and len(prefix) > best_len:
            best, best_len = lr, len(prefix)
    if best is None:
        raise KeyError(f"no learning rate configured for block {name!r}")
    return best


class Adam:
    def __init__(self, params, lrs=None, beta1=0.9, beta2=0.999, eps=1e-8,
                 total_iters=1, position_decay=True):
        self.lrs = dict(DEFAULT_LRS if lrs is None else lrs)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.total_iters = max(int(total_iters), 1)
        self.position_decay = position_decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = {k: 0 for k in params}

    def register(self, params):
        """Pick up blocks added after construction (refinement deltas)."""
        for k, v in params.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(v)
                self.v[k] = np.zeros_like(v)
                self.t[k] = 0

    def _lr(self, name, it):
        lr = lr_for(name, self.lrs)
        if self.position_decay and name == "positions":
            lr = lr * POSITION_LR_FINAL_FACTOR ** (it / self.total_iters)
        return lr

    def step(self, params, grads, it, frozen=()):
        """Apply one Adam update; returns the names of blocks that moved."""
        frozen = tuple(frozen)
        stepped = []
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                continue
            if any(name == f or name.startswith(f + ".") for f in frozen):
                continue
            if not np.any(g):
                continue
            stepped.append(name)
            self.t[name] += 1
            t = self.t[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            mhat = m / (1.0 - self.beta1 ** t)
            vhat = v / (1.0 - self.beta2 ** t)
            p -= self._lr(name, it) * mhat / (np.sqrt(vhat) + self.eps)
        return stepped

    def state(self):
        return {"m": self.m, "v": self.v, "t": dict(self.t)}
