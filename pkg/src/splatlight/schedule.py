"""Progressive training schedule: term activation and freeze windows.

Default (variant I) timeline, in iterations:

  0       diffuse only
  5000    shadow term introduced; camera refinement activates
  9000    scattering term introduced; shadow gradients held [9000, 16000)
  13000   scattering gradients held [13000, 20000)
  16000   specular term introduced; light refinement activates;
          ASG lobe scale/rotation held [16000, 20000)

`active_mask` reduces all of that to two sets per iteration: which terms
contribute to shading and which parameter-block prefixes get exact-zero
gradients. Blocks exclusive to a not-yet-introduced term are reported as
frozen too, so "no gradient" is a provable property rather than a side
effect of graph construction.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

ASG_LOBE_BLOCKS = frozenset({"asg.quats", "asg.log_lambda", "asg.log_mu"})

# blocks that exist only to serve one term
TERM_BLOCKS = {
    "shadow": frozenset({"shadow_mlp"}),
    "sss": frozenset({"sss_mlp", "csss_raw"}),
    "specular": frozenset({"asg", "cs_raw"}),
}


@dataclass(frozen=True)
class ActiveMask:
    terms: frozenset
    frozen: frozenset

    def grads_flow(self, block):
        return not any(block == p or block.startswith(p + ".") for p in self.frozen)


@dataclass(frozen=True)
class TrainSchedule:
    total_iters: int = 100_000
    diffuse_start: int = 0
    shadow_start: int = 5_000
    sss_start: int = 9_000
    specular_start: int = 16_000
    shadow_freeze: tuple = (9_000, 16_000)
    sss_freeze: tuple = (13_000, 20_000)
    asg_lobe_freeze: tuple = (16_000, 20_000)
    camera_refine_start: int = 5_000
    light_refine_start: int = 16_000

    def validate(self):
        if not (0 <= self.diffuse_start <= self.shadow_start <= self.sss_start
                <= self.specular_start <= self.total_iters):
            raise ValueError(
                "schedule starts must satisfy 0 <= diffuse <= shadow <= sss "
                f"<= specular <= total_iters, got {self}")
        for name in ("shadow_freeze", "sss_freeze", "asg_lobe_freeze"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} window {lo}..{hi} is inverted")
        return self

    def scaled(self, total_iters):
        """Rescale every threshold proportionally to a new run length."""
        f = total_iters / self.total_iters

        def s(x):
            return int(round(x * f))

        return replace(
            self, total_iters=total_iters,
            diffuse_start=s(self.diffuse_start), shadow_start=s(self.shadow_start),
            sss_start=s(self.sss_start), specular_start=s(self.specular_start),
            shadow_freeze=(s(self.shadow_freeze[0]), s(self.shadow_freeze[1])),
            sss_freeze=(s(self.sss_freeze[0]), s(self.sss_freeze[1])),
            asg_lobe_freeze=(s(self.asg_lobe_freeze[0]), s(self.asg_lobe_freeze[1])),
            camera_refine_start=s(self.camera_refine_start),
            light_refine_start=s(self.light_refine_start))


def schedule_variant(name, total_iters=100_000):
    """H: joint from the start; I: progressive default; J: specular and
    scattering phases swapped (freezes mirrored with them); K: diffuse-only
    warm-up then everything at once, no freezes."""
    if name == "I":
        sched = TrainSchedule(total_iters=total_iters)
    elif name == "H":
        sched = TrainSchedule(
            total_iters=total_iters, shadow_start=0, sss_start=0,
            specular_start=0, shadow_freeze=(0, 0), sss_freeze=(0, 0),
            asg_lobe_freeze=(0, 0), camera_refine_start=0, light_refine_start=0)
    elif name == "J":
        sched = TrainSchedule(
            total_iters=total_iters, sss_start=16_000, specular_start=9_000,
            sss_freeze=(16_000, 20_000), asg_lobe_freeze=(13_000, 20_000),
            light_refine_start=9_000)
    elif name == "K":
        sched = TrainSchedule(
            total_iters=total_iters, shadow_start=5_000, sss_start=5_000,
            specular_start=5_000, shadow_freeze=(0, 0), sss_freeze=(0, 0),
            asg_lobe_freeze=(0, 0), camera_refine_start=5_000,
            light_refine_start=5_000)
    else:
        raise ValueError(f"unknown schedule variant {name!r} (expected H/I/J/K)")
    if name == "J":
        # swapped starts break the monotone-start invariant by design;
        # validate the windows only
        for attr in ("shadow_freeze", "sss_freeze", "asg_lobe_freeze"):
            lo, hi = getattr(sched, attr)
            if lo > hi:
                raise ValueError(f"{attr} inverted")
        return sched
    return sched.validate()


def _in_window(it, window):
    return window[0] <= it < window[1]


def active_mask(sched, it):
    """Pure map from iteration to (terms on, frozen block prefixes)."""
    terms = {"diffuse"} if it >= sched.diffuse_start else set()
    frozen = set()

    if it >= sched.shadow_start:
        terms.add("shadow")
        if _in_window(it, sched.shadow_freeze):
            frozen |= TERM_BLOCKS["shadow"]
    else:
        frozen |= TERM_BLOCKS["shadow"]

    if it >= sched.sss_start:
        terms.add("sss")
        if _in_window(it, sched.sss_freeze):
            frozen |= TERM_BLOCKS["sss"]
    else:
        frozen |= TERM_BLOCKS["sss"]

    if it >= sched.specular_start:
        terms.add("specular")
        if _in_window(it, sched.asg_lobe_freeze):
            frozen |= ASG_LOBE_BLOCKS
    else:
        frozen |= TERM_BLOCKS["specular"]

    if it < sched.camera_refine_start:
        frozen.add("cam_delta")
    if it < sched.light_refine_start:
        frozen.add("light_delta")

    return ActiveMask(terms=frozenset(terms), frozen=frozenset(frozen))
