"""splatlight: CPU relighting engine for 3D Gaussian scenes.

Four-term reflectance (diffuse, specular, shadow, subsurface scattering)
on top of a differentiable splatting renderer, trained from one-light-
at-a-time captures, served interactively over HTTP.
"""
from .backend import USE_NUMBA, backend_name
from .config import Config, ConfigError, load_config
from .dataset import load_olat, make_synthetic, relight_trajectory, save_olat
from .geometry import Camera
from .metrics import psnr, ssim
from .renderer import RenderOptions, render_frame, render_image
from .scene import Scene
from .schedule import TrainSchedule, active_mask, schedule_variant
from .shading import COMPOSITIONS
from .trainer import Trainer

__version__ = "0.1.0"

__all__ = [
    "Camera", "COMPOSITIONS", "Config", "ConfigError", "RenderOptions",
    "Scene", "Trainer", "TrainSchedule", "USE_NUMBA", "active_mask",
    "backend_name", "load_config", "load_olat", "make_synthetic", "psnr",
    "relight_trajectory", "render_frame", "render_image", "save_olat",
    "schedule_variant", "ssim", "__version__",
]
