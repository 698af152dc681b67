"""Interactive relighting HTTP service.

POST /render takes a JSON pose + light description and returns a PNG.
The render itself runs synchronously inside a bounded worker pool; when
the admission queue is full the request is rejected with 429 so an
interactive client can drop stale frames instead of piling them up.

Status codes: 400 malformed body, 422 well-formed but invalid pose,
413 image larger than MAX_IMAGE_SIZE, 429 queue full, 503 checkpoint
still loading.
"""
from __future__ import annotations

import io
import json
import threading
import time
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from PIL import Image

from .dataset import linear_to_srgb
from .geometry import Camera, w2c_from_c2w
from .renderer import RenderOptions, render_frame, render_term_maps
from .scene import Scene
from .shading import COMPOSITIONS

MAX_IMAGE_SIZE = 256
DEBUG_TERMS = ("diffuse", "specular", "sss", "shadow")
DEFAULT_FOV_DEG = 50.0
WORKERS_DEFAULT = 2
QUEUE_DEFAULT = 8


class RequestError(Exception):
    def __init__(self, status, message):
        super().__init__(message)
        self.status = status
        self.message = message


def _fail(status, message):
    raise RequestError(status, message)


def _get_vec3(body, key, status=400):
    v = body.get(key)
    if (not isinstance(v, (list, tuple)) or len(v) != 3
            or not all(isinstance(x, (int, float)) for x in v)):
        _fail(status, f"{key}: expected [x, y, z] numbers")
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        _fail(422, f"{key}: values must be finite")
    return v


def _parse_size(body):
    out = []
    for key in ("width", "height"):
        v = body.get(key, 128)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            _fail(400, f"{key}: expected a positive integer")
        if v > MAX_IMAGE_SIZE:
            _fail(413, f"{key}: {v} exceeds maximum {MAX_IMAGE_SIZE}")
        out.append(v)
    return out


def _parse_terms(body):
    comp = body.get("composition", "D")
    if isinstance(comp, str):
        if comp not in COMPOSITIONS:
            _fail(400, f"composition: unknown key {comp!r}; "
                       f"choose from {sorted(COMPOSITIONS)} or give a term list")
        return COMPOSITIONS[comp]
    if isinstance(comp, list):
        bad = [t for t in comp if t not in DEBUG_TERMS]
        if bad or not comp:
            _fail(400, f"composition: invalid terms {bad}; allowed {list(DEBUG_TERMS)}")
        return frozenset(comp)
    _fail(400, "composition: expected a letter key or a list of term names")


def _parse_camera(body, width, height):
    cam = body.get("camera")
    if not isinstance(cam, dict):
        _fail(400, "camera: expected an object with 'c2w' or 'orbit'")
    fov = body.get("fov_deg", DEFAULT_FOV_DEG)
    if not isinstance(fov, (int, float)) or isinstance(fov, bool):
        _fail(400, "fov_deg: expected a number")
    if not (5.0 <= fov <= 175.0):
        _fail(422, f"fov_deg: {fov} outside [5, 175]")
    fx = 0.5 * width / np.tan(0.5 * np.deg2rad(fov))

    if "c2w" in cam:
        m = cam["c2w"]
        try:
            m = np.asarray(m, dtype=np.float64)
        except (TypeError, ValueError):
            _fail(400, "camera.c2w: expected a 4x4 numeric matrix")
        if m.shape != (4, 4):
            _fail(400, f"camera.c2w: expected shape (4, 4), got {m.shape}")
        if not np.all(np.isfinite(m)):
            _fail(422, "camera.c2w: values must be finite")
        if not np.allclose(m[3], [0, 0, 0, 1], atol=1e-5):
            _fail(422, "camera.c2w: last row must be [0, 0, 0, 1]")
        r = m[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-4):
            _fail(422, "camera.c2w: rotation block is not orthonormal")
        return Camera(w2c=w2c_from_c2w(m), fx=fx, fy=fx,
                      cx=width / 2.0, cy=height / 2.0,
                      width=width, height=height)
    if "orbit" in cam:
        orbit = cam["orbit"]
        if not isinstance(orbit, dict):
            _fail(400, "camera.orbit: expected an object")
        for key in ("azimuth", "elevation", "radius"):
            if not isinstance(orbit.get(key), (int, float)) or isinstance(orbit.get(key), bool):
                _fail(400, f"camera.orbit.{key}: expected a number")
        az = np.deg2rad(orbit["azimuth"])
        el = np.deg2rad(orbit["elevation"])
        radius = float(orbit["radius"])
        if not np.isfinite([az, el, radius]).all():
            _fail(422, "camera.orbit: values must be finite")
        if radius <= 0:
            _fail(422, f"camera.orbit.radius: {radius} must be positive")
        if abs(orbit["elevation"]) > 89.9:
            _fail(422, "camera.orbit.elevation: outside [-89.9, 89.9]")
        center = (_get_vec3(orbit, "center") if "center" in orbit
                  else np.zeros(3))
        eye = center + radius * np.array([np.cos(el) * np.cos(az),
                                          np.cos(el) * np.sin(az),
                                          np.sin(el)])
        return Camera.looking_at(eye=eye, target=center, fx=fx,
                                 width=width, height=height)
    _fail(400, "camera: needs either 'c2w' or 'orbit'")


def _parse_request(body):
    if not isinstance(body, dict):
        _fail(400, "body: expected a JSON object")
    width, height = _parse_size(body)
    terms = _parse_terms(body)
    light = _get_vec3(body, "light")
    camera = _parse_camera(body, width, height)
    debug = body.get("debug_term")
    if debug is not None and debug not in DEBUG_TERMS:
        _fail(400, f"debug_term: unknown {debug!r}; allowed {list(DEBUG_TERMS)}")
    shadow_on_sss = body.get("shadow_on_sss", False)
    if not isinstance(shadow_on_sss, bool):
        _fail(400, "shadow_on_sss: expected a boolean")
    bg = body.get("background", [0.0, 0.0, 0.0])
    if not (isinstance(bg, list) and len(bg) == 3
            and all(isinstance(x, (int, float)) for x in bg)):
        _fail(400, "background: expected [r, g, b]")
    srgb = body.get("srgb", True)
    if not isinstance(srgb, bool):
        _fail(400, "srgb: expected a boolean")
    opts = RenderOptions(terms=terms, shadow_on_sss=shadow_on_sss,
                         background=tuple(float(x) for x in bg))
    return camera, light, opts, debug, srgb


def _encode_png(img, srgb):
    img = np.clip(img, 0.0, 1.0)
    if srgb:
        img = linear_to_srgb(img)
    arr = (img * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _render_sync(state, camera, light, opts, debug, srgb):
    with state["worker_sem"]:
        result = render_frame(state["scene"].blocks, camera, light, opts)
        if debug is not None:
            maps = render_term_maps(result, camera, [debug],
                                    background=opts.background)
            if debug not in maps:
                _fail(400, f"debug_term: {debug!r} not active in this composition")
            img = maps[debug]
        else:
            img = result.image.value
        return _encode_png(img, srgb)


def create_app(checkpoint_path=None, scene=None, workers=WORKERS_DEFAULT,
               queue_limit=QUEUE_DEFAULT):
    """Build the FastAPI app. Pass `scene` directly or a checkpoint path.

    With a path the checkpoint loads on a background thread at startup;
    requests arriving before it finishes get 503.
    """
    state = {
        "scene": scene,
        "error": None,
        "worker_sem": threading.Semaphore(workers),
        "slots": threading.BoundedSemaphore(workers + queue_limit),
    }

    def _load():
        try:
            state["scene"] = Scene.load(checkpoint_path)
        except Exception as e:  # surfaced as 503 detail
            state["error"] = str(e)

    @asynccontextmanager
    async def _lifespan(_app):
        if checkpoint_path is not None and scene is None:
            threading.Thread(target=_load, daemon=True).start()
        yield

    app = FastAPI(title="splatlight", docs_url=None, redoc_url=None,
                  lifespan=_lifespan)
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    app.state.splat = state

    def _scene_or_503():
        if state["scene"] is None:
            msg = state["error"] or "checkpoint still loading"
            raise RequestError(503, msg)
        return state["scene"]

    @app.exception_handler(RequestError)
    async def _request_error(_req, exc):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.get("/scene/info")
    async def scene_info():
        sc = _scene_or_503()
        lo, hi = sc.bounds()
        return {
            "gaussian_count": int(sc.n_gaussians),
            "n_lobes": int(sc.n_lobes),
            "checkpoint_version": int(sc.meta.get("version", 0)),
            "bounds": {"min": lo.tolist(), "max": hi.tolist()},
            "compositions": {k: sorted(v) for k, v in COMPOSITIONS.items()},
            "debug_terms": list(DEBUG_TERMS),
            "max_image_size": MAX_IMAGE_SIZE,
        }

    @app.post("/render")
    async def render_endpoint(request: Request):
        _scene_or_503()
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise RequestError(400, "body: invalid JSON")
        camera, light, opts, debug, srgb = _parse_request(body)
        if not state["slots"].acquire(blocking=False):
            raise RequestError(429, "render queue full; retry later")
        try:
            t0 = time.perf_counter()
            png = await run_in_threadpool(_render_sync, state, camera, light,
                                          opts, debug, srgb)
            ms = (time.perf_counter() - t0) * 1000.0
        finally:
            state["slots"].release()
        return Response(content=png, media_type="image/png",
                        headers={"X-Render-Time-Ms": f"{ms:.1f}"})

    return app
