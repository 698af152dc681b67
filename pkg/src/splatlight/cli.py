"""Command-line entry points.

Exit codes: 0 success, 2 config error, 3 data error, 4 checkpoint error,
1 internal error. Failures print one line: `error:<category>: <message>`.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .config import Config, ConfigError, load_config
from .dataset import (OlatFrame, load_olat, load_trajectory, make_synthetic,
                      relight_trajectory, save_image, save_olat, save_trajectory)
from .geometry import Camera
from .metrics import psnr, ssim
from .renderer import render_frame, render_image, render_term_maps
from .scene import Scene
from .shading import COMPOSITIONS
from .trainer import Trainer, init_psnr


class DataError(RuntimeError):
    pass


class CheckpointError(RuntimeError):
    pass


def _load_frames(root, srgb=False):
    try:
        return load_olat(root, srgb=srgb)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        raise DataError(str(e)) from e


def _orbit_camera(args, size):
    az, el = np.deg2rad(args.azimuth), np.deg2rad(args.elevation)
    eye = np.array(args.center) + args.radius * np.array(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
    fx = 0.5 * size / np.tan(0.5 * np.deg2rad(args.fov))
    return Camera.looking_at(eye=eye, target=args.center, fx=fx,
                             width=size, height=size)


def _load_checkpoint(path):
    try:
        return Scene.load(path)
    except (OSError, ValueError) as e:
        raise CheckpointError(str(e)) from e


def cmd_synth(args):
    scene, frames = make_synthetic(seed=args.seed, n_gaussians=args.n_gaussians,
                                   n_frames=args.n_frames, image_size=args.size)
    os.makedirs(args.out, exist_ok=True)
    save_olat(args.out, frames)
    scene.save(os.path.join(args.out, "ground_truth.splat"))
    print(f"wrote {len(frames)} frames and ground_truth.splat to {args.out}")
    return 0


def cmd_train(args):
    cfg = load_config(args.config, overrides={
        "dataset": args.dataset, "out": args.out, "seed": args.seed,
        "variant": args.variant, "total_iters": args.iters,
        "scale_schedule": True if args.scale_schedule else None,
        "srgb": True if args.srgb else None,
        "composition": args.composition, "n_gaussians": args.n_gaussians,
    })
    if not cfg.dataset:
        raise ConfigError("dataset: required (flag --dataset or config key)")
    frames = _load_frames(cfg.dataset, srgb=cfg.srgb)
    scene = Scene.init(n=cfg.n_gaussians, seed=cfg.seed, n_lobes=cfg.n_lobes,
                       f0_init=cfg.f0_init)
    if args.resume:
        scene = _load_checkpoint(args.resume)
    trainer = Trainer(scene, frames, cfg)
    os.makedirs(cfg.out, exist_ok=True)
    cfg.to_yaml(os.path.join(cfg.out, "config.yaml"))

    def boundary_preview(it, tr):
        pdir = os.path.join(cfg.out, "previews")
        os.makedirs(pdir, exist_ok=True)
        fr = frames[0]
        img = render_image(tr.scene.blocks, fr.camera, fr.light_pos, tr.opts,
                           frame_index=0)
        save_image(os.path.join(pdir, f"iter_{it:06d}.png"), img)

    t0 = time.time()
    history = trainer.train(out_dir=cfg.out, on_boundary=boundary_preview)
    print(f"trained {cfg.total_iters} iterations in {time.time() - t0:.1f}s; "
          f"final loss {history[-1][1]:.6f}; checkpoints in {cfg.out}")
    return 0


def cmd_render(args):
    scene = _load_checkpoint(args.checkpoint)
    cfg = Config(composition=args.composition or "D").validate()
    opts = cfg.render_options()
    cam = _orbit_camera(args, args.size)
    light = np.array(args.light)
    res = render_frame(scene.blocks, cam, light, opts)
    save_image(args.out, res.image.value)
    if args.debug_terms:
        maps = render_term_maps(res, cam, args.debug_terms.split(","),
                                background=opts.background)
        stem, ext = os.path.splitext(args.out)
        for term, img in maps.items():
            save_image(f"{stem}_{term}{ext}", img)
    print(f"wrote {args.out}")
    return 0


def cmd_relight(args):
    scene = _load_checkpoint(args.checkpoint)
    opts = Config(composition=args.composition or "D").validate().render_options()
    os.makedirs(args.out, exist_ok=True)
    if args.trajectory:
        traj = load_trajectory(args.trajectory)
    else:
        traj = relight_trajectory(image_size=args.size)
        save_trajectory(os.path.join(args.out, "trajectory.json"), traj)
    for i, (cam, light) in enumerate(traj.steps()):
        img = render_image(scene.blocks, cam, light, opts)
        save_image(os.path.join(args.out, f"step_{i:04d}.png"), img)
    print(f"wrote {len(traj)} frames to {args.out}")
    return 0


def cmd_eval(args):
    scene = _load_checkpoint(args.checkpoint)
    frames = _load_frames(args.dataset, srgb=args.srgb)
    opts = Config(composition=args.composition or "D").validate().render_options()
    rows = []
    for fr in frames:
        img = np.clip(render_image(scene.blocks, fr.camera, fr.light_pos, opts), 0, 1)
        rows.append((fr.frame_id, psnr(img, fr.image), ssim(img, fr.image)))
    out = args.out or "eval.csv"
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frame", "psnr_db", "ssim"])
        for fid, p, s in rows:
            w.writerow([fid, f"{p:.4f}", f"{s:.6f}"])
    mp = float(np.mean([r[1] for r in rows]))
    ms = float(np.mean([r[2] for r in rows]))
    print(f"{'frame':<12}{'PSNR':>10}{'SSIM':>10}")
    for fid, p, s in rows[:10]:
        print(f"{fid:<12}{p:>10.2f}{s:>10.4f}")
    print(f"{'mean':<12}{mp:>10.2f}{ms:>10.4f}  ({len(rows)} frames, csv: {out})")
    return 0


def cmd_ablate(args):
    frames = _load_frames(args.dataset, srgb=args.srgb)
    variants = args.variants.split(",")
    for v in variants:
        if v not in COMPOSITIONS:
            raise ConfigError(f"variants: unknown composition {v!r}")
    rows = []
    for v in variants:
        cfg = load_config(args.config, overrides={
            "dataset": args.dataset, "composition": v, "seed": args.seed,
            "total_iters": args.iters, "scale_schedule": True,
            "n_gaussians": args.n_gaussians})
        scene = Scene.init(n=cfg.n_gaussians, seed=cfg.seed)
        tr = Trainer(scene, frames, cfg)
        tr.train()
        rows.append((v, "train", tr.eval_psnr()))
        print(f"variant {v}: train PSNR {rows[-1][2]:.2f} dB")
    out = args.out or "ablation.csv"
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["variant", "split", "psnr_db"])
        for r in rows:
            w.writerow([r[0], r[1], f"{r[2]:.4f}"])
    print(f"wrote {out}")
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app
    app = create_app(args.checkpoint)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_bench(args):
    from benchmarks.bench_kernels import main as bench_main
    bench_main()
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="splatlight",
                                description="Physically-based relighting for 3D Gaussian scenes")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic OLAT dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-gaussians", type=int, default=100)
    sp.add_argument("--n-frames", type=int, default=48)
    sp.add_argument("--size", type=int, default=64)
    sp.set_defaults(func=cmd_synth)

    tp = sub.add_parser("train", help="train on an OLAT dataset")
    tp.add_argument("--config")
    tp.add_argument("--dataset")
    tp.add_argument("--out")
    tp.add_argument("--seed", type=int)
    tp.add_argument("--iters", type=int, dest="iters")
    tp.add_argument("--n-gaussians", type=int)
    tp.add_argument("--variant", choices=["H", "I", "J", "K"])
    tp.add_argument("--composition", choices=sorted(COMPOSITIONS))
    tp.add_argument("--scale-schedule", action="store_true")
    tp.add_argument("--srgb", action="store_true",
                    help="linearize dataset images on load")
    tp.add_argument("--resume")
    tp.set_defaults(func=cmd_train)

    rp = sub.add_parser("render", help="render one view of a checkpoint")
    rp.add_argument("--checkpoint", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--azimuth", type=float, default=0.0)
    rp.add_argument("--elevation", type=float, default=15.0)
    rp.add_argument("--radius", type=float, default=2.4)
    rp.add_argument("--center", type=float, nargs=3, default=[0.0, 0.0, 0.0])
    rp.add_argument("--fov", type=float, default=50.0)
    rp.add_argument("--light", type=float, nargs=3, default=[4.0, 0.0, 2.0])
    rp.add_argument("--size", type=int, default=128)
    rp.add_argument("--composition", choices=sorted(COMPOSITIONS))
    rp.add_argument("--debug-terms", help="comma list: diffuse,specular,sss,shadow")
    rp.set_defaults(func=cmd_render)

    lp = sub.add_parser("relight", help="render the relighting trajectory")
    lp.add_argument("--checkpoint", required=True)
    lp.add_argument("--out", required=True)
    lp.add_argument("--trajectory")
    lp.add_argument("--size", type=int, default=128)
    lp.add_argument("--composition", choices=sorted(COMPOSITIONS))
    lp.set_defaults(func=cmd_relight)

    ep = sub.add_parser("eval", help="PSNR/SSIM against a dataset")
    ep.add_argument("--checkpoint", required=True)
    ep.add_argument("--dataset", required=True)
    ep.add_argument("--out")
    ep.add_argument("--composition", choices=sorted(COMPOSITIONS))
    ep.add_argument("--srgb", action="store_true")
    ep.set_defaults(func=cmd_eval)

    ap = sub.add_parser("ablate", help="train composition variants, emit CSV")
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--variants", default="A,D")
    ap.add_argument("--config")
    ap.add_argument("--iters", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-gaussians", type=int, default=100)
    ap.add_argument("--out")
    ap.add_argument("--srgb", action="store_true")
    ap.set_defaults(func=cmd_ablate)

    vp = sub.add_parser("serve", help="run the relighting HTTP service")
    vp.add_argument("--checkpoint", required=True)
    vp.add_argument("--host", default="127.0.0.1")
    vp.add_argument("--port", type=int, default=int(os.environ.get("SPLATLIGHT_PORT", 8799)))
    vp.set_defaults(func=cmd_serve)

    bp = sub.add_parser("bench", help="compare numba and numpy kernel backends")
    bp.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error:config: {e}", file=sys.stderr)
        return 2
    except (FileNotFoundError, DataError) as e:
        print(f"error:data: {e}", file=sys.stderr)
        return 3
    except CheckpointError as e:
        print(f"error:checkpoint: {e}", file=sys.stderr)
        return 4
    except Exception as e:  # pragma: no cover - catch-all reporting path
        print(f"error:internal: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
