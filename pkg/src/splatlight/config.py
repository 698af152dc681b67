"""Run configuration: one YAML file, every tunable default in one place.

Schedule thresholds, learning rates, the composition mask, the variant
name and the seed all live here; anything omitted falls back to the
defaults below. Validation reports the offending field by name.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import yaml

from .optim import DEFAULT_LRS
from .schedule import TrainSchedule, schedule_variant
from .shading import COMPOSITIONS


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    # data / run
    dataset: str = ""
    out: str = "runs/run"
    seed: int = 0
    srgb: bool = False

    # scene
    n_gaussians: int = 10_000
    n_lobes: int = 8            # ASG bank size; small on purpose, CPU budget
    f0_init: float = 0.04       # dielectric Fresnel base
    background: tuple = (0.0, 0.0, 0.0)  # black (NRHints/SSS-GS style); white for GS3-style

    # schedule
    variant: str = "I"
    total_iters: int = 100_000
    scale_schedule: bool = False  # rescale phase thresholds to total_iters

    # composition
    composition: str = "D"
    shadow_on_sss: bool = False
    classical_dipole: bool = False
    eta: float = 1.3            # dipole relative index of refraction

    # rendering
    shadow_max_rays: int = 64
    shadow_exact: bool = False
    near: float = 0.2

    # optimization
    lrs: dict = field(default_factory=dict)
    adam_eps: float = 1e-8
    checkpoint_every: int = 0   # 0: only at phase boundaries and the end

    def __post_init__(self):
        # a partial lrs dict overrides defaults without dropping the rest
        merged = dict(DEFAULT_LRS)
        merged.update(self.lrs or {})
        self.lrs = merged
        self.background = tuple(self.background)

    def validate(self):
        if self.composition not in COMPOSITIONS:
            raise ConfigError(
                f"composition: unknown variant {self.composition!r} "
                f"(expected one of {sorted(COMPOSITIONS)})")
        if self.variant not in ("H", "I", "J", "K"):
            raise ConfigError(f"variant: expected H/I/J/K, got {self.variant!r}")
        if self.n_gaussians < 1:
            raise ConfigError("n_gaussians: must be >= 1")
        if self.n_lobes < 1:
            raise ConfigError("n_lobes: must be >= 1")
        if self.total_iters < 1:
            raise ConfigError("total_iters: must be >= 1")
        if not 0.0 < self.eta:
            raise ConfigError("eta: must be positive")
        if len(self.background) != 3:
            raise ConfigError("background: expected 3 components")
        try:
            self.schedule()
        except ValueError as e:
            raise ConfigError(f"schedule: {e}") from e
        return self

    def schedule(self) -> TrainSchedule:
        sched = schedule_variant(self.variant)
        if self.scale_schedule:
            sched = sched.scaled(self.total_iters)
        else:
            sched = replace(sched, total_iters=self.total_iters)
        return sched

    def render_options(self):
        from .renderer import RenderOptions
        return RenderOptions(
            terms=COMPOSITIONS[self.composition],
            shadow_on_sss=self.shadow_on_sss,
            classical_dipole=self.classical_dipole,
            eta=self.eta,
            background=tuple(self.background),
            shadow_max_rays=self.shadow_max_rays,
            shadow_exact=self.shadow_exact,
            near=self.near,
        )

    def to_yaml(self, path):
        with open(path, "w") as f:
            yaml.safe_dump(asdict(self), f, sort_keys=False)


def load_config(path=None, overrides=None):
    data = {}
    if path:
        try:
            with open(path) as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"config file: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"config file is not valid YAML: {e}") from e
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f for f in Config.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return Config(**data).validate()
