"""Reflectance terms: pinned identities, a naive ASG oracle, ablation masks."""
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import splatlight.tape as T
from splatlight.geometry import normalize_np, quat_to_rot
from splatlight.shading import (COMPOSITIONS, HALF_VECTOR_EPS, asg_frames_t,
                                asg_np, asg_t, diffuse_np, diffuse_t,
                                fresnel_np, half_vector_np, normal_np,
                                shade_np, shade_t, specular_np, specular_t)

from oracles import asg_naive


def lobe_frames(quats):
    R = quat_to_rot(quats)
    return R[:, :, 0], R[:, :, 1]


class TestDiffuse:
    def test_aligned_and_orthogonal(self):
        n = np.array([[0.0, 0, 1]])
        assert diffuse_np(n, np.array([[0.0, 0, 1]]))[0] == 1.0
        assert diffuse_np(n, np.array([[1.0, 0, 0]]))[0] == 0.0

    def test_backfacing_clamps_to_zero(self):
        n = np.array([[0.0, 0, 1]])
        wi = normalize_np(np.array([[0.0, 0.6, -0.8]]))
        assert diffuse_np(n, wi)[0] == 0.0

    def test_half_angle_value(self):
        n = np.array([[0.0, 0, 1]])
        wi = normalize_np(np.array([[1.0, 0, 1]]))
        assert np.isclose(diffuse_np(n, wi)[0], np.cos(np.pi / 4))

    def test_gradient_away_from_clamp(self, rng):
        n = normalize_np(rng.normal(size=(4, 3)))
        wi = normalize_np(n + 0.3 * rng.normal(size=(4, 3)))  # front-facing

        def f(t, l):
            return T.reduce_mean(diffuse_t(l["n"], l["wi"]))

        assert T.grad_check(f, {"n": n, "wi": wi}) < 1e-5


class TestNormals:
    def test_points_toward_camera(self, rng):
        quats = normalize_np(rng.normal(size=(40, 4)))
        means = rng.uniform(-0.5, 0.5, (40, 3))
        cam = np.array([2.0, 0.3, 0.8])
        n = normal_np(quats, means, cam)
        dots = np.sum(n * (cam - means), axis=-1)
        assert np.all(dots >= 0)
        assert np.allclose(np.linalg.norm(n, axis=-1), 1.0)

    def test_is_rotated_z_axis_up_to_sign(self, rng):
        quats = normalize_np(rng.normal(size=(10, 4)))
        means = np.zeros((10, 3))
        n = normal_np(quats, means, np.array([0.0, 0, 3.0]))
        z = quat_to_rot(quats)[:, :, 2]
        agree = np.isclose(np.abs(np.sum(n * z, axis=-1)), 1.0)
        assert np.all(agree)


class TestSpecular:
    def test_fresnel_head_on(self):
        # wo == h: cos = 1 -> F = F0 exactly
        h = np.array([[0.0, 0, 1]])
        assert fresnel_np(0.04, h, h)[0] == pytest.approx(0.04, abs=0)

    def test_fresnel_grazing(self):
        h = np.array([[0.0, 0, 1]])
        wo = np.array([[1.0, 0, 0]])
        assert np.isclose(fresnel_np(0.04, wo, h)[0], 0.04 + 0.96)

    def test_asg_on_lobe_axis(self):
        # h orthogonal to both lobe axes (i.e. h = z_j): exponent is 0
        quats = np.array([[1.0, 0, 0, 0]])
        ax, ay = lobe_frames(quats)
        h = np.array([[0.0, 0, 1.0]])
        val = asg_np(h, ax, ay, np.array([7.0]), np.array([3.0]), np.array([1.0]))
        assert val[0] == 1.0

    def test_asg_zero_weights(self, rng):
        quats = normalize_np(rng.normal(size=(5, 4)))
        ax, ay = lobe_frames(quats)
        h = normalize_np(rng.normal(size=(6, 3)))
        val = asg_np(h, ax, ay, rng.uniform(1, 9, 5), rng.uniform(1, 9, 5),
                     np.zeros(5))
        assert np.all(val == 0.0)

    def test_asg_matches_naive_oracle(self, rng):
        quats = normalize_np(rng.normal(size=(4, 4)))
        ax, ay = lobe_frames(quats)
        log_lam = rng.uniform(0, 3, 4)
        log_mu = rng.uniform(0, 3, 4)
        log_w = rng.uniform(-2, 0.5, 4)
        h = normalize_np(rng.normal(size=(20, 3)))
        got = asg_np(h, ax, ay, np.exp(log_lam), np.exp(log_mu), np.exp(log_w))
        for i in range(len(h)):
            ref = asg_naive(h[i], quats, log_lam, log_mu, log_w)
            assert np.isclose(got[i], ref, atol=1e-12)

    def test_single_lobe_axis_unit_weight_gives_f0(self):
        # one lobe, h on the lobe axis, weight 1, wo == h -> exactly F0
        quats = np.array([[1.0, 0, 0, 0]])
        ax, ay = lobe_frames(quats)
        h = np.array([[0.0, 0, 1.0]])
        got = specular_np(h, h, 0.04, ax, ay, np.array([5.0]), np.array([5.0]),
                          np.array([1.0]))
        assert got[0] == pytest.approx(0.04, abs=1e-15)

    def test_degenerate_half_vector_is_zero(self):
        wi = np.array([[0.0, 0, 1.0]])
        wo = -wi + np.array([[0.0, 1e-12, 0.0]])
        got = specular_np(wi, wo, 0.04, *lobe_frames(np.array([[1.0, 0, 0, 0]])),
                          np.array([5.0]), np.array([5.0]), np.array([1.0]))
        assert got[0] == 0.0

    def test_swap_wi_wo_symmetry_of_half_vector(self, rng):
        wi = normalize_np(rng.normal(size=(8, 3)))
        wo = normalize_np(rng.normal(size=(8, 3)))
        h1, ok1 = half_vector_np(wi, wo)
        h2, ok2 = half_vector_np(wo, wi)
        assert np.array_equal(h1, h2) and np.array_equal(ok1, ok2)

    def test_tape_matches_numpy_and_differentiates(self, rng):
        quats = normalize_np(rng.normal(size=(3, 4)))
        params = {
            "wi": normalize_np(rng.normal(size=(6, 3))),
            "wo": normalize_np(rng.normal(size=(6, 3))),
            "lq": quats,
            "ll": rng.uniform(0, 2, 3),
            "lm": rng.uniform(0, 2, 3),
            "lw": rng.uniform(-2, 0, 3),
            "f0r": np.array(0.0),
        }

        def build(t, l):
            ax, ay = asg_frames_t(l["lq"])
            return specular_t(l["wi"], l["wo"], T.sigmoid(l["f0r"]), ax, ay,
                              T.exp(l["ll"]), T.exp(l["lm"]), T.exp(l["lw"]))

        tape = T.Tape()
        leaves = {k: tape.leaf(k, v) for k, v in params.items()}
        got = build(tape, leaves).value

        ax, ay = lobe_frames(quats)
        want = specular_np(params["wi"], params["wo"],
                           1 / (1 + np.exp(-params["f0r"])), ax, ay,
                           np.exp(params["ll"]), np.exp(params["lm"]),
                           np.exp(params["lw"]))
        assert np.allclose(got, want, atol=1e-12)

        err = T.grad_check(lambda t, l: T.reduce_mean(build(t, l)), params)
        assert err < 1e-5


class TestShadeComposition:
    @staticmethod
    def _inputs(rng, n=7):
        return dict(
            c_d=rng.uniform(0, 1, (n, 3)), c_s=rng.uniform(0, 1, (n, 3)),
            c_sss=rng.uniform(0, 1, (n, 3)), f_d=rng.uniform(0, 1, n),
            f_s=rng.uniform(0, 1, n), f_sss=rng.uniform(0, 0.3, n),
            shadow=rng.uniform(0, 1, n))

    def test_full_model_formula(self, rng):
        i = self._inputs(rng)
        got = shade_np(**i, terms=COMPOSITIONS["D"])
        want = ((i["c_d"] * i["f_d"][:, None] + i["c_s"] * i["f_s"][:, None])
                * i["shadow"][:, None] + i["c_sss"] * i["f_sss"][:, None])
        assert np.allclose(got, want, atol=1e-15)

    def test_scattering_bypasses_shadow(self, rng):
        i = self._inputs(rng)
        i["shadow"] = np.zeros_like(i["shadow"])
        got = shade_np(**i, terms=COMPOSITIONS["D"])
        assert np.allclose(got, i["c_sss"] * i["f_sss"][:, None], atol=1e-15)

    def test_shadow_on_sss_variant(self, rng):
        i = self._inputs(rng)
        i["shadow"] = np.zeros_like(i["shadow"])
        got = shade_np(**i, terms=COMPOSITIONS["D"], shadow_on_sss=True)
        assert np.all(got == 0.0)

    def test_masks_match_manual_sums(self, rng):
        i = self._inputs(rng)
        zero = np.zeros_like(i["f_d"])
        one = np.ones_like(i["shadow"])
        expect = {
            "A": (i["c_d"] * i["f_d"][:, None]),
            "B": (i["c_d"] * i["f_d"][:, None] + i["c_s"] * i["f_s"][:, None]),
            "C": (i["c_d"] * i["f_d"][:, None] + i["c_s"] * i["f_s"][:, None]
                  + i["c_sss"] * i["f_sss"][:, None]),
            "E": (i["c_d"] * i["f_d"][:, None]) * i["shadow"][:, None]
                 + i["c_sss"] * i["f_sss"][:, None],
            "F": (i["c_d"] * i["f_d"][:, None] + i["c_s"] * i["f_s"][:, None])
                 * i["shadow"][:, None],
        }
        for key, want in expect.items():
            got = shade_np(**i, terms=COMPOSITIONS[key])
            assert np.allclose(got, want, atol=1e-15), key

    def test_output_affine_in_shadow(self, rng):
        # C(S) must be affine: C(s) == C(0) + s*(C(1) - C(0))
        i = self._inputs(rng)
        s = i.pop("shadow")
        c0 = shade_np(**i, shadow=np.zeros_like(s), terms=COMPOSITIONS["D"])
        c1 = shade_np(**i, shadow=np.ones_like(s), terms=COMPOSITIONS["D"])
        cs = shade_np(**i, shadow=s, terms=COMPOSITIONS["D"])
        assert np.allclose(cs, c0 + s[:, None] * (c1 - c0), atol=1e-12)

    def test_tape_matches_numpy_for_all_compositions(self, rng):
        i = self._inputs(rng)
        for key, terms in COMPOSITIONS.items():
            for on_sss in (False, True):
                tape = T.Tape()
                leaves = {k: tape.leaf(k, v) for k, v in i.items()}
                got = shade_t(leaves["c_d"], leaves["c_s"], leaves["c_sss"],
                              leaves["f_d"], leaves["f_s"], leaves["f_sss"],
                              leaves["shadow"], terms=terms,
                              shadow_on_sss=on_sss).value
                want = shade_np(**i, terms=terms, shadow_on_sss=on_sss)
                assert np.allclose(got, want, atol=1e-14), (key, on_sss)

    def test_disabled_terms_accept_none(self, rng):
        i = self._inputs(rng)
        tape = T.Tape()
        lc = tape.leaf("c_d", i["c_d"])
        lf = tape.leaf("f_d", i["f_d"])
        got = shade_t(lc, None, None, lf, None, None, None,
                      terms=COMPOSITIONS["A"]).value
        assert np.allclose(got, i["c_d"] * i["f_d"][:, None], atol=1e-15)

    def test_composition_letter_sets(self):
        assert COMPOSITIONS["A"] == {"diffuse"}
        assert COMPOSITIONS["B"] == {"diffuse", "specular"}
        assert COMPOSITIONS["C"] == {"diffuse", "specular", "sss"}
        assert COMPOSITIONS["D"] == {"diffuse", "specular", "sss", "shadow"}
        assert COMPOSITIONS["E"] == COMPOSITIONS["D"] - {"specular"}
        assert COMPOSITIONS["F"] == COMPOSITIONS["D"] - {"sss"}
