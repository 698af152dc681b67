"""Differentiable frame rendering: the full forward model on one tape.

One call builds the whole graph for a (camera, light) pair: covariance
projection, four shading terms at Gaussian centers, shadow stage 1 (plain
numpy, stop-gradient) feeding the neural refiner, and the fused splat
node. The returned image node backpropagates into every registered scene
block plus the per-frame camera/light deltas.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tape as T
from .geometry import (Camera, build_cov3d_t, build_inv_cov3d, conic_and_radius,
                       conic_t, ewa_project_t, project_means_t, rodrigues_t,
                       transform_points_t, w2c_from_c2w)
from .rasterizer import forward as raster_forward
from .rasterizer import rasterize_t, sort_order
from .scene import sigmoid
from .shading import COMPOSITIONS, asg_frames_t, diffuse_t, normal_t, shade_t, specular_t
from .shadow import ShadowRefiner, coarse_visibility
from .sss import SssField

NEAR_PLANE = 0.2


@dataclass
class RenderOptions:
    terms: frozenset = COMPOSITIONS["D"]
    shadow_on_sss: bool = False
    classical_dipole: bool = False
    eta: float = 1.3
    background: tuple = (0.0, 0.0, 0.0)
    shadow_max_rays: int = 64
    shadow_exact: bool = False
    near: float = NEAR_PLANE


@dataclass
class RenderResult:
    tape: object
    image: object            # (H, W, 3) node
    leaves: dict
    order: np.ndarray
    radii: np.ndarray
    t_end: np.ndarray
    n_contrib: np.ndarray
    vhat: np.ndarray | None
    aux: dict = field(default_factory=dict)


_SSS = SssField()
_SHADOW = ShadowRefiner()


def render_frame(blocks, camera: Camera, light_pos, opts: RenderOptions,
                 frame_index=None, vhat_override=None, tape=None, leaves=None):
    """Build the forward graph for one frame.

    frame_index routes the per-frame refinement deltas; None renders with
    the raw camera/light (inference). vhat_override pins stage-1 shadow
    values (used by gradient checks, where the closure must hold the
    stop-gradient inputs fixed).
    """
    tp = tape or T.Tape()
    if leaves is None:
        leaves = {name: tp.leaf(name, arr) for name, arr in blocks.items()}

    h, w = camera.height, camera.width
    fx, fy, cx, cy = camera.fx, camera.fy, camera.cx, camera.cy

    # refined camera: R = exp([omega]) R0, t = t0 + dt
    r0 = tp.constant(camera.w2c[:3, :3])
    t0 = tp.constant(camera.w2c[:3, 3])
    light0 = tp.constant(np.asarray(light_pos, dtype=np.float64))
    if frame_index is not None and "cam_delta" in leaves:
        row = T.getitem(leaves["cam_delta"], (frame_index,))
        omega = T.getitem(row, (slice(0, 3),))
        dt = T.getitem(row, (slice(3, 6),))
        rot = T.matmul(rodrigues_t(omega), r0)
        trans = T.add(t0, dt)
        light = T.add(light0, T.getitem(leaves["light_delta"], (frame_index,)))
    else:
        rot, trans, light = r0, t0, light0
    cam_pos = T.neg(T.matmul(T.transpose_last2(rot), trans))

    positions = leaves["positions"]
    means_cam = transform_points_t(rot, trans, positions)
    cov3d = build_cov3d_t(leaves["log_scales"], leaves["quats"])
    cov2d = ewa_project_t(means_cam, cov3d, rot, fx, fy)
    conics = conic_t(cov2d)
    mean2d = project_means_t(means_cam, fx, fy, cx, cy)
    _, radii = conic_and_radius(cov2d.value)
    depths = means_cam.value[:, 2]
    order = sort_order(depths, mean2d.value, radii, h, w, near=opts.near)

    opac = T.sigmoid(leaves["opacity_raw"])
    wo = T.normalize(T.sub(cam_pos, positions), axis=-1)
    wi = T.normalize(T.sub(light, positions), axis=-1)
    normal = normal_t(leaves["quats"], positions.value, cam_pos.value)

    terms = opts.terms
    f_d = diffuse_t(normal, wi) if "diffuse" in terms else None
    f_s = None
    if "specular" in terms:
        ax, ay = asg_frames_t(leaves["asg.quats"])
        lam = T.exp(leaves["asg.log_lambda"])
        mu = T.exp(leaves["asg.log_mu"])
        wgt = T.exp(leaves["asg.log_weight"])
        f0 = T.sigmoid(leaves["asg.f0_raw"])
        f_s = specular_t(wi, wo, f0, ax, ay, lam, mu, wgt)
    f_sss = None
    if "sss" in terms:
        f_sss = _SSS.f_sss_t(leaves, positions, wo, wi, normal, leaves["embed"],
                             eta=opts.eta, classical=opts.classical_dipole)
    shadow_s = None
    vhat = None
    if "shadow" in terms:
        if vhat_override is not None:
            vhat = np.asarray(vhat_override, dtype=np.float64)
        else:
            c2w_ref = w2c_from_c2w(_w2c_from_nodes(rot.value, trans.value))
            vhat, _ = coarse_visibility(
                np.asarray(light.value, dtype=np.float64), positions.value,
                build_inv_cov3d(leaves["log_scales"].value, leaves["quats"].value),
                sigmoid(leaves["opacity_raw"].value), mean2d.value,
                conics.value, radii, order, cam_pos.value, c2w_ref,
                fx, fy, cx, cy, h, w, max_rays=opts.shadow_max_rays,
                exact=opts.shadow_exact)
        shadow_s = _SHADOW.refine_t(leaves, positions, wi, vhat, leaves["embed"])

    colors = shade_t(_color(leaves, "cd"), _color(leaves, "cs"),
                     _color(leaves, "csss"), f_d, f_s, f_sss, shadow_s,
                     terms=terms, shadow_on_sss=opts.shadow_on_sss)

    bg = tp.constant(np.asarray(opts.background, dtype=np.float64))
    image, t_end, n_contrib = rasterize_t(mean2d, conics, opac, colors, bg,
                                          order, radii, h, w)
    aux = {
        "f_d": f_d, "f_s": f_s, "f_sss": f_sss, "shadow": shadow_s,
        "mean2d": mean2d, "conics": conics, "opac": opac, "colors": colors,
    }
    return RenderResult(tape=tp, image=image, leaves=leaves, order=order,
                        radii=radii, t_end=t_end, n_contrib=n_contrib,
                        vhat=vhat, aux=aux)


def _color(leaves, which):
    return T.sigmoid(leaves[f"{which}_raw"])


def _w2c_from_nodes(rot, trans):
    m = np.eye(4)
    m[:3, :3] = rot
    m[:3, 3] = trans
    return m


def l1_loss(result, target):
    """Mean absolute error over every pixel of the frame."""
    diff = T.sub(result.image, result.tape.constant(np.asarray(target, dtype=np.float64)))
    return T.reduce_mean(T.absval(diff))


def render_image(blocks, camera, light_pos, opts, frame_index=None):
    """Inference-only render: returns the (H, W, 3) float image."""
    return render_frame(blocks, camera, light_pos, opts,
                        frame_index=frame_index).image.value


def render_term_maps(result, camera, terms_wanted, background=(0.0, 0.0, 0.0)):
    """Re-splat per-term colors from a finished forward pass (debug output).

    Shadow is splatted as a grayscale S map; the other terms as their
    color * intensity contribution. Maps composite over `background`
    like the main image does; a white background turns the shadow map
    into 1 - attenuation, readable independently of alpha coverage.
    """
    maps = {}
    mean2d = result.aux["mean2d"].value
    conics = result.aux["conics"].value
    opac = result.aux["opac"].value
    n = len(opac)
    bg = np.asarray(background, dtype=np.float64)
    for term in terms_wanted:
        node = {"diffuse": result.aux["f_d"], "specular": result.aux["f_s"],
                "sss": result.aux["f_sss"], "shadow": result.aux["shadow"]}[term]
        if node is None:
            continue
        if term == "shadow":
            colors = np.repeat(node.value[:, None], 3, axis=1)
        else:
            cname = {"diffuse": "cd", "specular": "cs", "sss": "csss"}[term]
            base = sigmoid(result.leaves[f"{cname}_raw"].value)
            colors = base * node.value[:, None]
        img, _, _ = raster_forward(result.order, mean2d, conics, result.radii,
                                   opac, np.ascontiguousarray(colors), bg,
                                   camera.height, camera.width)
        maps[term] = img
    return maps
