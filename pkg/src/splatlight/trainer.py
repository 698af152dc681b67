"""Progressive training loop over OLAT frames.

One frame per iteration, sampled uniformly without replacement per epoch.
Each step renders through the currently active composition, backprops a
mean-L1 pixel loss, applies the per-block Adam step with the schedule's
freeze set, and renormalizes quaternions. Terms excluded by the ablation
composition are frozen for the whole run, so e.g. variant F provably
never updates the scattering parameters.
"""
from __future__ import annotations

import csv
import os
from dataclasses import replace

import numpy as np

from . import tape as T
from .metrics import psnr
from .optim import Adam
from .renderer import l1_loss, render_frame, render_image
from .schedule import TERM_BLOCKS, active_mask
from .scene import Scene


class DivergenceError(RuntimeError):
    pass


def phase_boundaries(sched):
    pts = {sched.shadow_start, sched.sss_start, sched.specular_start,
           *sched.shadow_freeze, *sched.sss_freeze, *sched.asg_lobe_freeze}
    return sorted(p for p in pts if 0 < p < sched.total_iters)


class Trainer:
    def __init__(self, scene: Scene, frames, config, schedule=None):
        self.scene = scene
        self.frames = frames
        self.config = config
        self.sched = (schedule or config.schedule())
        self.opts = config.render_options()
        self.composition = self.opts.terms
        scene.ensure_refinement(len(frames))
        self.optimizer = Adam(scene.blocks, lrs=config.lrs, eps=config.adam_eps,
                              total_iters=self.sched.total_iters)
        self.rng = np.random.default_rng(config.seed)
        self._epoch_order: list[int] = []
        # composition-excluded terms never receive gradients at all
        self.comp_frozen = frozenset().union(
            *(TERM_BLOCKS[t] for t in TERM_BLOCKS if t not in self.composition))

    def _next_frame(self):
        if not self._epoch_order:
            self._epoch_order = list(self.rng.permutation(len(self.frames)))
        return self._epoch_order.pop()

    def step(self, it, frame_idx=None):
        idx = self._next_frame() if frame_idx is None else frame_idx
        frame = self.frames[idx]
        mask = active_mask(self.sched, it)
        terms = mask.terms & self.composition
        opts = replace(self.opts, terms=frozenset(terms))
        res = render_frame(self.scene.blocks, frame.camera, frame.light_pos,
                           opts, frame_index=idx)
        loss = l1_loss(res, frame.image)
        lv = float(loss.value)
        if not np.isfinite(lv):
            bad = np.argwhere(~np.isfinite(res.image.value))
            raise DivergenceError(
                f"non-finite loss at iteration {it}, frame {frame.frame_id}; "
                f"first offending pixel {bad[0].tolist() if len(bad) else '?'}")
        frozen = mask.frozen | self.comp_frozen
        grads = T.backward(res.tape, loss, frozen=frozen)
        self.optimizer.register(self.scene.blocks)
        stepped = self.optimizer.step(self.scene.blocks, grads, it, frozen=frozen)
        self.scene.normalize_rotations(only=stepped)
        return lv

    def train(self, out_dir=None, log_every=50, on_boundary=None):
        sched = self.sched
        cfg = self.config
        history = []
        writer = None
        logf = None
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            logf = open(os.path.join(out_dir, "loss_log.csv"), "w", newline="")
            writer = csv.writer(logf)
            writer.writerow(["iteration", "loss"])
        boundaries = set(phase_boundaries(sched))
        try:
            for it in range(sched.total_iters):
                lv = self.step(it)
                if it % log_every == 0 or it == sched.total_iters - 1:
                    history.append((it, lv))
                    if writer:
                        writer.writerow([it, f"{lv:.8f}"])
                at_boundary = it + 1 in boundaries
                periodic = cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0
                if out_dir and (at_boundary or periodic):
                    self.scene.save(os.path.join(out_dir, f"ckpt_{it + 1:06d}.splat"))
                    if at_boundary and on_boundary:
                        on_boundary(it + 1, self)
            if out_dir:
                self.scene.save(os.path.join(out_dir, "ckpt_final.splat"))
        finally:
            if logf:
                logf.close()
        return history

    def eval_psnr(self, frames=None, frame_offset=0):
        """Mean PSNR over frames, rendered with refinement deltas applied."""
        frames = self.frames if frames is None else frames
        vals = []
        for i, fr in enumerate(frames):
            img = render_image(self.scene.blocks, fr.camera, fr.light_pos,
                               self.opts, frame_index=frame_offset + i)
            vals.append(psnr(np.clip(img, 0.0, 1.0), fr.image))
        return float(np.mean(vals))


def init_psnr(scene, frames, opts):
    """PSNR of an untrained scene against the frames (no deltas)."""
    vals = []
    for fr in frames:
        img = render_image(scene.blocks, fr.camera, fr.light_pos, opts)
        vals.append(psnr(np.clip(img, 0.0, 1.0), fr.image))
    return float(np.mean(vals))
