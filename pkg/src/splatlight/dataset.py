"""OLAT dataset io, synthetic fixtures, and the relighting trajectory.

Datasets are NeRF-style transforms JSON plus one mandatory extension: a
per-frame point-light position under the key `pl_pos` (aliases:
`light_pos`, `pl_position`, `point_light`). Poses in the JSON follow the
OpenGL camera convention and are converted on load.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .geometry import GL_TO_CV, Camera, look_at, w2c_from_c2w
from .renderer import RenderOptions, render_image
from .scene import Scene, logit

PL_POS_ALIASES = ("pl_pos", "light_pos", "pl_position", "point_light")

# relighting sweep geometry
LIGHT_STEP_DEG = 2.4
CAM_STEP_DEG = 2.0
LIGHT_STEPS = 150   # 360 / 2.4
CAM_STEPS = 90      # 180 / 2

CAM_ELEVATION_DEG = 15.0
LIGHT_ELEVATION_DEG = 30.0


@dataclass
class OlatFrame:
    image: np.ndarray | None
    camera: Camera
    light_pos: np.ndarray
    frame_id: str


@dataclass
class Trajectory:
    cameras: list
    lights: list

    def __len__(self):
        return len(self.cameras)

    def steps(self):
        return list(zip(self.cameras, self.lights))


def srgb_to_linear(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c):
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1 / 2.4) - 0.055)


def load_image(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def save_image(path, img):
    arr = (np.clip(np.asarray(img), 0.0, 1.0) * 255.0).round().astype(np.uint8)
    Image.fromarray(arr).save(path)


def _light_from_frame(frame, fid):
    for key in PL_POS_ALIASES:
        if key in frame:
            return np.asarray(frame[key], dtype=np.float64)
    raise ValueError(
        f"frame {fid!r} has no point-light position (expected one of {PL_POS_ALIASES})")


def _resolve_image_path(root, file_path):
    p = os.path.join(root, file_path)
    if os.path.exists(p):
        return p
    for ext in (".png", ".jpg", ".jpeg"):
        if os.path.exists(p + ext):
            return p + ext
    raise FileNotFoundError(f"image for frame {file_path!r} not found under {root}")


def load_olat(root, srgb=False, load_images=True):
    """Read transforms.json and its images into OlatFrames."""
    tpath = os.path.join(root, "transforms.json")
    with open(tpath) as f:
        meta = json.load(f)
    frames = []
    for i, fr in enumerate(meta["frames"]):
        fid = fr.get("file_path", f"frame_{i}")
        light = _light_from_frame(fr, fid)
        image = None
        if load_images:
            image = load_image(_resolve_image_path(root, fr["file_path"]))
            if srgb:
                image = srgb_to_linear(image)
        if image is not None:
            height, width = image.shape[:2]
        else:
            width, height = int(meta.get("w", 0)), int(meta.get("h", 0))
        if "fl_x" in meta:
            fx, fy = float(meta["fl_x"]), float(meta.get("fl_y", meta["fl_x"]))
        else:
            fx = 0.5 * width / np.tan(0.5 * float(meta["camera_angle_x"]))
            fy = fx
        cx = float(meta.get("cx", width / 2.0))
        cy = float(meta.get("cy", height / 2.0))
        c2w_gl = np.asarray(fr["transform_matrix"], dtype=np.float64)
        c2w = c2w_gl @ GL_TO_CV
        cam = Camera(w2c=w2c_from_c2w(c2w), fx=fx, fy=fy, cx=cx, cy=cy,
                     width=width, height=height)
        frames.append(OlatFrame(image=image, camera=cam, light_pos=light, frame_id=fid))
    return frames


def save_olat(root, frames, camera_angle_x=None):
    """Write frames (with images) back out in the loadable format."""
    os.makedirs(root, exist_ok=True)
    cam0 = frames[0].camera
    meta = {
        "camera_angle_x": (camera_angle_x if camera_angle_x is not None
                           else float(2.0 * np.arctan(0.5 * cam0.width / cam0.fx))),
        "w": cam0.width,
        "h": cam0.height,  # so metadata-only loads know the image size
        "frames": [],
    }
    for i, fr in enumerate(frames):
        name = f"r_{i}"
        save_image(os.path.join(root, name + ".png"), fr.image)
        c2w_gl = fr.camera.c2w @ GL_TO_CV  # involution: CV -> GL is the same flip
        meta["frames"].append({
            "file_path": name,
            "transform_matrix": c2w_gl.tolist(),
            "pl_pos": np.asarray(fr.light_pos, dtype=np.float64).tolist(),
        })
    with open(os.path.join(root, "transforms.json"), "w") as f:
        json.dump(meta, f, indent=1)


def _sphere_dir(azimuth_deg, elevation_deg):
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def _golden_spiral(n, radius, rng_phase=0.0):
    """Deterministic well-spread points on a sphere of given radius."""
    k = np.arange(n)
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - 2.0 * (k + 0.5) / n
    az = 2.0 * np.pi * k / phi + rng_phase
    s = np.sqrt(1.0 - z * z)
    return radius * np.stack([s * np.cos(az), s * np.sin(az), z], axis=-1)


def make_synthetic(seed=0, n_gaussians=100, n_frames=48, image_size=64,
                   n_lobes=8, cam_radius=2.4, light_radius=4.0,
                   opts: RenderOptions | None = None):
    """Ground-truth scene + OLAT frames rendered with its own forward model.

    Cameras sit on a golden spiral at cam_radius looking at the origin,
    one light per frame on a larger spiral (OLAT). Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    scene = Scene.init(n=n_gaussians, seed=seed + 1, n_lobes=n_lobes)
    n = n_gaussians
    # overwrite the neutral init with a materially varied ground truth
    u = rng.uniform(size=(n, 1)) ** (1.0 / 3.0)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    scene.blocks["positions"] = 0.6 * u * d
    scene.blocks["log_scales"] = np.log(rng.uniform(0.08, 0.18, (n, 3)))
    q = rng.standard_normal((n, 4))
    scene.blocks["quats"] = q / np.linalg.norm(q, axis=-1, keepdims=True)
    scene.blocks["opacity_raw"] = logit(rng.uniform(0.5, 0.95, n))
    scene.blocks["cd_raw"] = logit(rng.uniform(0.15, 0.85, (n, 3)))
    scene.blocks["cs_raw"] = logit(rng.uniform(0.1, 0.5, (n, 3)))
    scene.blocks["csss_raw"] = logit(rng.uniform(0.2, 0.8, (n, 3)))
    scene.blocks["embed"] = rng.normal(0.0, 0.3, (n, 6))
    scene.blocks["asg.log_lambda"] = np.log(rng.uniform(2.0, 20.0, n_lobes))
    scene.blocks["asg.log_mu"] = np.log(rng.uniform(2.0, 20.0, n_lobes))
    scene.blocks["asg.log_weight"] = np.log(rng.uniform(0.2, 1.2, n_lobes))

    opts = opts or RenderOptions()
    cams = _golden_spiral(n_frames, cam_radius)
    lights = _golden_spiral(n_frames, light_radius, rng_phase=1.0)
    fx = float(image_size)
    frames = []
    for i in range(n_frames):
        cam = Camera.looking_at(eye=cams[i], target=[0.0, 0.0, 0.0], fx=fx,
                                width=image_size, height=image_size)
        img = render_image(scene.blocks, cam, lights[i], opts)
        frames.append(OlatFrame(image=img, camera=cam, light_pos=lights[i],
                                frame_id=f"r_{i}"))
    return scene, frames


def relight_trajectory(center=(0.0, 0.0, 0.0), radius_light=4.0, radius_cam=2.4,
                       image_size=128, fx=None):
    """Four-phase light/camera sweep: 150 + 90 + 150 + 90 = 480 steps.

    Phase 1: light circles 360 deg in 2.4 deg steps, camera at front.
    Phase 2: camera swings 180 deg to the back in 2 deg steps.
    Phase 3: light circles again around the back view.
    Phase 4: camera swings 180 deg back to the front.
    Azimuths wrap modulo 360 so the first and last cameras are identical.
    """
    center = np.asarray(center, dtype=np.float64)
    fx = float(fx if fx is not None else image_size)

    def cam_at(az_deg):
        eye = center + radius_cam * _sphere_dir(az_deg % 360.0, CAM_ELEVATION_DEG)
        return Camera.looking_at(eye=eye, target=center, fx=fx,
                                 width=image_size, height=image_size)

    def light_at(az_deg):
        return center + radius_light * _sphere_dir(az_deg % 360.0, LIGHT_ELEVATION_DEG)

    cameras, lights = [], []
    for k in range(LIGHT_STEPS):
        cameras.append(cam_at(0.0))
        lights.append(light_at(k * LIGHT_STEP_DEG))
    for k in range(1, CAM_STEPS + 1):
        cameras.append(cam_at(k * CAM_STEP_DEG))
        lights.append(light_at(0.0))
    for k in range(LIGHT_STEPS):
        cameras.append(cam_at(180.0))
        lights.append(light_at(k * LIGHT_STEP_DEG))
    for k in range(1, CAM_STEPS + 1):
        cameras.append(cam_at(180.0 + k * CAM_STEP_DEG))
        lights.append(light_at(0.0))
    return Trajectory(cameras=cameras, lights=lights)


def save_trajectory(path, traj):
    cam0 = traj.cameras[0]
    data = {
        "fx": cam0.fx, "fy": cam0.fy, "cx": cam0.cx, "cy": cam0.cy,
        "width": cam0.width, "height": cam0.height,
        "steps": [{"c2w": c.c2w.tolist(),
                   "light_pos": np.asarray(l, dtype=np.float64).tolist()}
                  for c, l in traj.steps()],
    }
    with open(path, "w") as f:
        json.dump(data, f)


def load_trajectory(path):
    with open(path) as f:
        data = json.load(f)
    cams, lights = [], []
    for step in data["steps"]:
        c2w = np.asarray(step["c2w"], dtype=np.float64)
        cams.append(Camera(w2c=w2c_from_c2w(c2w), fx=data["fx"], fy=data["fy"],
                           cx=data["cx"], cy=data["cy"], width=data["width"],
                           height=data["height"]))
        lights.append(np.asarray(step["light_pos"], dtype=np.float64))
    return Trajectory(cameras=cams, lights=lights)
