"""Scene state: named parameter blocks plus the checkpoint container.

Every learnable quantity lives in one flat dict of float64 arrays keyed by
block name, which is exactly the granularity the tape, optimizer and
schedule freezes operate on:

  positions (N,3)       Gaussian centers, world units
  log_scales (N,3)      per-axis std devs, log-space
  quats (N,4)           rotations, normalized on read and after each step
  opacity_raw (N,)      pre-sigmoid opacity
  cd_raw/cs_raw/csss_raw (N,3)  pre-sigmoid diffuse/specular/scattering color
  embed (N,6)           material embedding m
  asg.quats (J,4)       per-lobe frames
  asg.log_lambda/log_mu/log_weight (J,)  bandwidths and weights, log-space
  asg.f0_raw ()         pre-sigmoid scene-wide Fresnel base
  sss_mlp.* shadow_mlp.*  neural field weights
  cam_delta (F,6) light_delta (F,3)  optional per-frame refinement state

Checkpoints are a small self-describing binary: magic, version, a JSON
manifest (dtype/shape per block plus metadata), then raw C-order bytes.
"""
from __future__ import annotations

import io
import json
import struct

import numpy as np

from .geometry import build_cov3d, build_inv_cov3d, normalize_np
from .shadow import ShadowRefiner
from .sss import SssField

MAGIC = b"SPLT"
VERSION = 1
N_LOBES_DEFAULT = 8
N_GAUSSIANS_DEFAULT = 10_000
F0_INIT = 0.04

GAUSSIAN_BLOCKS = ("positions", "log_scales", "quats", "opacity_raw",
                   "cd_raw", "cs_raw", "csss_raw", "embed")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def logit(p):
    return np.log(p / (1.0 - p))


class Scene:
    """Parameter container; all math reads through the accessors below."""

    def __init__(self, blocks, meta=None):
        self.blocks = {k: np.asarray(v, dtype=np.float64) for k, v in blocks.items()}
        self.meta = dict(meta or {})
        self.meta.setdefault("version", VERSION)
        self.meta.setdefault("n_lobes", len(self.blocks["asg.log_weight"]))

    # -- construction -------------------------------------------------------

    @classmethod
    def init(cls, n=N_GAUSSIANS_DEFAULT, seed=0, n_lobes=N_LOBES_DEFAULT,
             f0_init=F0_INIT):
        """Fresh scene: centers uniform on the unit sphere, mid-gray colors,
        opacity 0.5, isotropic scales sized to the per-point sphere area."""
        rng = np.random.default_rng(seed)
        positions = normalize_np(rng.standard_normal((n, 3)))
        scale0 = 2.0 / np.sqrt(n)
        quats = np.zeros((n, 4))
        quats[:, 0] = 1.0
        blocks = {
            "positions": positions,
            "log_scales": np.full((n, 3), np.log(scale0)),
            "quats": quats,
            "opacity_raw": np.zeros(n),
            "cd_raw": np.zeros((n, 3)),
            "cs_raw": np.zeros((n, 3)),
            "csss_raw": np.zeros((n, 3)),
            "embed": rng.normal(0.0, 0.01, (n, 6)),
            "asg.quats": normalize_np(rng.standard_normal((n_lobes, 4))),
            "asg.log_lambda": np.full(n_lobes, np.log(5.0)),
            "asg.log_mu": np.full(n_lobes, np.log(5.0)),
            "asg.log_weight": np.full(n_lobes, np.log(0.1)),
            "asg.f0_raw": np.array(logit(f0_init)),
        }
        blocks.update(SssField(rng).weights)
        blocks.update(ShadowRefiner(rng).weights)
        return cls(blocks, {"seed": seed, "n_lobes": n_lobes})

    def ensure_refinement(self, n_frames):
        """Allocate per-frame camera/light deltas once the dataset is known."""
        if "cam_delta" not in self.blocks:
            self.blocks["cam_delta"] = np.zeros((n_frames, 6))
            self.blocks["light_delta"] = np.zeros((n_frames, 3))
        return self

    # -- accessors -----------------------------------------------------------

    @property
    def n_gaussians(self):
        return len(self.blocks["positions"])

    @property
    def n_lobes(self):
        return len(self.blocks["asg.log_weight"])

    def positions(self):
        return self.blocks["positions"]

    def scales(self):
        return np.exp(self.blocks["log_scales"])

    def opacities(self):
        return sigmoid(self.blocks["opacity_raw"])

    def color(self, which):
        return sigmoid(self.blocks[f"{which}_raw"])

    def cov3d(self):
        return build_cov3d(self.blocks["log_scales"], self.blocks["quats"])

    def inv_cov3d(self):
        return build_inv_cov3d(self.blocks["log_scales"], self.blocks["quats"])

    def bounds(self):
        p = self.blocks["positions"]
        return p.min(axis=0), p.max(axis=0)

    def normalize_rotations(self, only=None):
        """Renormalize unit-norm invariants after an optimizer step.

        `only` limits the pass to blocks that actually stepped; a skipped
        block must stay bit-identical, and renormalizing by a norm that is
        merely close to 1 would still perturb it.
        """
        for key in ("quats", "asg.quats"):
            if only is not None and key not in only:
                continue
            q = self.blocks[key]
            q /= np.linalg.norm(q, axis=-1, keepdims=True)

    def validate(self):
        sss = SssField()
        shad = ShadowRefiner()
        sss.mlp.validate(self.blocks)
        shad.mlp.validate(self.blocks)
        for name in GAUSSIAN_BLOCKS:
            if name not in self.blocks:
                raise ValueError(f"missing Gaussian block {name!r}")
            if len(self.blocks[name]) != self.n_gaussians:
                raise ValueError(f"block {name!r} length mismatch")
        return self

    # -- checkpoint io -------------------------------------------------------

    def save(self, path):
        manifest = {
            "meta": self.meta,
            "blocks": {k: {"dtype": str(v.dtype), "shape": list(v.shape)}
                       for k, v in self.blocks.items()},
        }
        mbytes = json.dumps(manifest).encode()
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            f.write(struct.pack("<Q", len(mbytes)))
            f.write(mbytes)
            for v in self.blocks.values():
                f.write(np.ascontiguousarray(v).tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            data = f.read()
        buf = io.BytesIO(data)
        magic = buf.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a scene checkpoint (magic {magic!r})")
        version = struct.unpack("<I", buf.read(4))[0]
        if version != VERSION:
            raise ValueError(
                f"checkpoint version {version} unsupported (reader is {VERSION})")
        mlen = struct.unpack("<Q", buf.read(8))[0]
        manifest = json.loads(buf.read(mlen).decode())
        blocks = {}
        for name, desc in manifest["blocks"].items():
            arr = np.frombuffer(buf.read(int(np.prod(desc["shape"]) or 1) * np.dtype(desc["dtype"]).itemsize),
                                dtype=desc["dtype"]).reshape(desc["shape"]).copy()
            blocks[name] = arr
        scene = cls(blocks, manifest["meta"])
        scene.meta["version"] = version
        return scene.validate()
