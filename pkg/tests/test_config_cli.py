"""Config validation and the command-line interface end to end."""
import json
import os

import numpy as np
import pytest
import yaml

from splatlight.cli import main
from splatlight.config import Config, ConfigError, load_config
from splatlight.scene import Scene


class TestConfig:
    def test_defaults_validate(self):
        cfg = Config().validate()
        assert cfg.composition == "D"
        assert cfg.variant == "I"
        assert cfg.total_iters == 100_000

    def test_bad_composition(self):
        with pytest.raises(ConfigError, match="composition"):
            Config(composition="Z").validate()

    def test_bad_variant(self):
        with pytest.raises(ConfigError, match="variant"):
            Config(variant="Q").validate()

    def test_bad_counts(self):
        with pytest.raises(ConfigError, match="n_gaussians"):
            Config(n_gaussians=0).validate()
        with pytest.raises(ConfigError, match="total_iters"):
            Config(total_iters=0).validate()
        with pytest.raises(ConfigError, match="background"):
            Config(background=(1.0, 1.0)).validate()

    def test_schedule_scaling_switch(self):
        scaled = Config(total_iters=1000, scale_schedule=True).schedule()
        assert scaled.shadow_start == 50
        plain = Config(total_iters=1000, scale_schedule=False).schedule()
        assert plain.shadow_start == 5000
        assert plain.total_iters == 1000

    def test_render_options_mapping(self):
        opts = Config(composition="B", eta=1.5, background=(1, 1, 1),
                      shadow_on_sss=True).render_options()
        assert opts.terms == frozenset({"diffuse", "specular"})
        assert opts.eta == 1.5
        assert opts.background == (1, 1, 1)
        assert opts.shadow_on_sss

    def test_yaml_round_trip(self, tmp_path):
        cfg = Config(seed=7, composition="C", n_gaussians=123,
                     lrs={"positions": 1e-5}).validate()
        p = tmp_path / "c.yaml"
        cfg.to_yaml(p)
        back = load_config(str(p))
        assert back == cfg

    def test_overrides_and_none_skipped(self, tmp_path):
        p = tmp_path / "c.yaml"
        yaml.safe_dump({"seed": 1, "composition": "A"}, p.open("w"))
        cfg = load_config(str(p), overrides={"seed": 9, "out": None})
        assert cfg.seed == 9
        assert cfg.composition == "A"
        assert cfg.out == "runs/run"

    def test_unknown_fields_named(self, tmp_path):
        p = tmp_path / "c.yaml"
        yaml.safe_dump({"sede": 1, "composition": "A"}, p.open("w"))
        with pytest.raises(ConfigError, match="sede"):
            load_config(str(p))

    def test_partial_lrs_merge(self, tmp_path):
        p = tmp_path / "c.yaml"
        yaml.safe_dump({"lrs": {"positions": 42.0}}, p.open("w"))
        cfg = load_config(str(p))
        assert cfg.lrs["positions"] == 42.0
        assert cfg.lrs["cd_raw"] == 2.5e-2  # untouched defaults survive

    def test_missing_file_is_config_error(self):
        with pytest.raises(ConfigError, match="config file"):
            load_config("/nonexistent/conf.yaml")

    def test_invalid_yaml_is_config_error(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("a: [unclosed")
        with pytest.raises(ConfigError, match="YAML"):
            load_config(str(p))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One synthetic dataset reused by all the CLI runs below."""
    root = tmp_path_factory.mktemp("cli")
    data = str(root / "data")
    rc = main(["synth", "--out", data, "--seed", "1", "--n-gaussians", "8",
               "--n-frames", "4", "--size", "16"])
    assert rc == 0
    return {"root": root, "data": data,
            "gt": os.path.join(data, "ground_truth.splat")}


class TestCliSynth:
    def test_outputs(self, workspace):
        d = workspace["data"]
        assert os.path.exists(os.path.join(d, "transforms.json"))
        assert os.path.exists(os.path.join(d, "r_0.png"))
        assert os.path.exists(os.path.join(d, "r_3.png"))
        assert os.path.exists(workspace["gt"])
        Scene.load(workspace["gt"]).validate()


class TestCliTrain:
    def test_train_run(self, workspace):
        out = str(workspace["root"] / "run")
        rc = main(["train", "--dataset", workspace["data"], "--out", out,
                   "--iters", "8", "--n-gaussians", "8", "--variant", "H",
                   "--seed", "0"])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "ckpt_final.splat"))
        assert os.path.exists(os.path.join(out, "loss_log.csv"))
        assert os.path.exists(os.path.join(out, "config.yaml"))
        workspace["ckpt"] = os.path.join(out, "ckpt_final.splat")

    def test_missing_dataset_flag(self, capsys):
        rc = main(["train", "--iters", "4"])
        assert rc == 2
        assert "error:config" in capsys.readouterr().err

    def test_nonexistent_dataset(self, workspace, capsys):
        rc = main(["train", "--dataset", "/no/such/dir", "--iters", "4",
                   "--out", str(workspace["root"] / "x")])
        assert rc == 3
        assert "error:data" in capsys.readouterr().err

    def test_bad_config_field(self, workspace, capsys):
        p = workspace["root"] / "bad.yaml"
        yaml.safe_dump({"iters_total": 5}, p.open("w"))
        rc = main(["train", "--config", str(p), "--dataset", workspace["data"]])
        assert rc == 2
        assert "iters_total" in capsys.readouterr().err

    def test_bad_variant_rejected_by_parser(self):
        with pytest.raises(SystemExit) as e:
            main(["train", "--variant", "Q"])
        assert e.value.code == 2

    def test_resume_from_checkpoint(self, workspace):
        out = str(workspace["root"] / "resumed")
        rc = main(["train", "--dataset", workspace["data"], "--out", out,
                   "--iters", "4", "--variant", "H",
                   "--resume", workspace["gt"]])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "ckpt_final.splat"))


class TestCliRender:
    def test_render_png(self, workspace):
        out = str(workspace["root"] / "view.png")
        rc = main(["render", "--checkpoint", workspace["gt"], "--out", out,
                   "--size", "24", "--azimuth", "30", "--light", "3", "1", "2"])
        assert rc == 0
        from PIL import Image
        with Image.open(out) as im:
            assert im.size == (24, 24)

    def test_debug_terms(self, workspace):
        out = str(workspace["root"] / "dbg.png")
        rc = main(["render", "--checkpoint", workspace["gt"], "--out", out,
                   "--size", "16", "--debug-terms", "diffuse,shadow"])
        assert rc == 0
        assert os.path.exists(str(workspace["root"] / "dbg_diffuse.png"))
        assert os.path.exists(str(workspace["root"] / "dbg_shadow.png"))

    def test_missing_checkpoint(self, capsys):
        rc = main(["render", "--checkpoint", "/no/ckpt.splat", "--out", "/tmp/x.png"])
        assert rc == 4
        assert "error:checkpoint" in capsys.readouterr().err

    def test_corrupt_checkpoint(self, workspace, capsys):
        p = workspace["root"] / "junk.splat"
        p.write_bytes(b"not a checkpoint at all")
        rc = main(["render", "--checkpoint", str(p),
                   "--out", str(workspace["root"] / "y.png")])
        assert rc == 4
        assert "error:checkpoint" in capsys.readouterr().err


class TestCliEval:
    def test_eval_csv(self, workspace, capsys):
        out = str(workspace["root"] / "eval.csv")
        rc = main(["eval", "--checkpoint", workspace["gt"],
                   "--dataset", workspace["data"], "--out", out])
        assert rc == 0
        with open(out) as f:
            lines = f.read().strip().splitlines()
        assert lines[0] == "frame,psnr_db,ssim"
        assert len(lines) == 5
        printed = capsys.readouterr().out
        assert "mean" in printed
        # ground truth against its own renders: effectively lossless
        psnrs = [float(l.split(",")[1]) for l in lines[1:]]
        assert min(psnrs) > 45.0


class TestCliRelight:
    def test_custom_trajectory(self, workspace):
        from splatlight.dataset import (Trajectory, relight_trajectory,
                                        save_trajectory)
        full = relight_trajectory(image_size=16)
        short = Trajectory(cameras=full.cameras[:2], lights=full.lights[:2])
        tpath = str(workspace["root"] / "traj2.json")
        save_trajectory(tpath, short)
        out = str(workspace["root"] / "seq")
        rc = main(["relight", "--checkpoint", workspace["gt"], "--out", out,
                   "--trajectory", tpath])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "step_0000.png"))
        assert os.path.exists(os.path.join(out, "step_0001.png"))
        assert not os.path.exists(os.path.join(out, "step_0002.png"))


class TestCliAblate:
    def test_two_variants_csv(self, workspace):
        out = str(workspace["root"] / "abl.csv")
        rc = main(["ablate", "--dataset", workspace["data"], "--variants",
                   "A,D", "--iters", "6", "--n-gaussians", "8", "--out", out])
        assert rc == 0
        with open(out) as f:
            lines = f.read().strip().splitlines()
        assert lines[0] == "variant,split,psnr_db"
        assert [l.split(",")[0] for l in lines[1:]] == ["A", "D"]
        assert all(np.isfinite(float(l.split(",")[2])) for l in lines[1:])

    def test_unknown_variant(self, workspace, capsys):
        rc = main(["ablate", "--dataset", workspace["data"], "--variants", "A,Z"])
        assert rc == 2
        assert "error:config" in capsys.readouterr().err
