"""Compositing contract and the fused splat kernel vs naive oracles."""
import numpy as np
import pytest

import splatlight.tape as T
from splatlight.rasterizer import (TERM_EPS, backward, backward_reference,
                                   composite, forward, forward_reference,
                                   rasterize_t, sort_order)

from conftest import random_splats
from oracles import composite_naive, fd_grad, rasterize_naive


class TestComposite:
    def test_empty_list_is_background(self):
        rgb, w, t = composite(np.zeros((0, 3)), np.zeros(0), (0.2, 0.4, 0.6))
        assert np.array_equal(rgb, [0.2, 0.4, 0.6])
        assert t == 1.0

    def test_single_opaque_entry(self):
        rgb, w, t = composite(np.array([[0.3, 0.5, 0.7]]), np.array([1.0]))
        assert np.array_equal(rgb, [0.3, 0.5, 0.7])
        assert t == 0.0 and w[0] == 1.0

    def test_two_half_alpha(self):
        rgb, w, t = composite(np.array([[1.0, 0, 0], [0, 1.0, 0]]),
                              np.array([0.5, 0.5]))
        assert np.allclose(rgb, [0.5, 0.25, 0])
        assert np.allclose(w, [0.5, 0.25]) and np.isclose(t, 0.25)

    def test_background_through_transmittance(self):
        rgb, _, t = composite(np.array([[0.0, 0.0, 0.0]]), np.array([0.25]),
                              background=(1.0, 1.0, 1.0))
        assert np.allclose(rgb, 0.75) and np.isclose(t, 0.75)

    def test_oracle_10k_random_lists(self, rng):
        for _ in range(10_000):
            n = rng.integers(0, 33)
            colors = rng.uniform(0, 1, (n, 3))
            # occasionally saturate so the termination path is exercised
            alphas = rng.uniform(0, 1, n) ** rng.choice([1.0, 0.1])
            bg = rng.uniform(0, 1, 3)
            got_rgb, got_w, got_t = composite(colors, alphas, bg)
            ref_rgb, ref_w, ref_t = composite_naive(colors, alphas, bg)
            assert np.allclose(got_rgb, ref_rgb, atol=1e-12, rtol=0)
            assert np.allclose(got_w, ref_w, atol=1e-12, rtol=0)
            assert abs(got_t - ref_t) <= 1e-12

    def test_weight_sum_bounded(self, rng):
        for _ in range(2000):
            n = rng.integers(1, 40)
            alphas = rng.uniform(0, 1, n)
            _, w, _ = composite(rng.uniform(0, 1, (n, 3)), alphas)
            assert w.sum() <= 1.0 + 1e-12

    def test_output_bounded_by_max_component(self, rng):
        for _ in range(500):
            n = rng.integers(1, 20)
            colors = rng.uniform(0, 1, (n, 3))
            rgb, _, _ = composite(colors, rng.uniform(0, 1, n))
            assert np.all(rgb <= colors.max(axis=0) + 1e-12)

    def test_zero_alpha_insertion_bit_identical(self, rng):
        n = 12
        colors = rng.uniform(0, 1, (n, 3))
        alphas = rng.uniform(0, 0.9, n)
        base_rgb, _, base_t = composite(colors, alphas)
        for pos in (0, 5, n):
            c2 = np.insert(colors, pos, rng.uniform(0, 1, 3), axis=0)
            a2 = np.insert(alphas, pos, 0.0)
            rgb, _, t = composite(c2, a2)
            assert np.array_equal(rgb, base_rgb)
            assert t == base_t

    def test_termination_rule_boundary(self):
        # prefix transmittance drops below 1e-4 after the second entry:
        # the third contribution must be excluded entirely
        alphas = np.array([0.999, 0.999, 0.5])
        colors = np.ones((3, 3))
        _, w, _ = composite(colors, alphas)
        assert w[2] == 0.0
        assert w[1] > 0.0


class TestSortOrder:
    def test_depth_ascending_id_tiebreak(self):
        depths = np.array([3.0, 1.0, 3.0, 0.1])  # last is behind near plane
        means2d = np.tile([5.0, 5.0], (4, 1))
        radii = np.full(4, 2.0)
        order = sort_order(depths, means2d, radii, 10, 10, near=0.2)
        assert order.tolist() == [1, 0, 2]

    def test_offscreen_culled(self):
        depths = np.ones(3)
        means2d = np.array([[5.0, 5.0], [-50.0, 5.0], [5.0, 80.0]])
        radii = np.array([2.0, 2.0, 2.0])
        order = sort_order(depths, means2d, radii, 10, 10)
        assert order.tolist() == [0]

    def test_touching_edge_kept(self):
        means2d = np.array([[-2.0, 5.0]])
        order = sort_order(np.ones(1), means2d, np.array([2.0]), 10, 10)
        assert order.tolist() == [0]


class TestForwardKernel:
    def test_matches_naive_oracle(self, rng):
        h = w = 12
        for trial in range(4):
            r2 = np.random.default_rng(100 + trial)
            means2d, conics, radii, opac, colors, depths = random_splats(r2, 14, w, h)
            order = sort_order(depths, means2d, radii, h, w)
            img, t_end, n_contrib = forward(order, means2d, conics, radii,
                                            opac, colors, np.array([0.1, 0.2, 0.3]), h, w)
            ref = rasterize_naive(order, means2d, conics, radii, opac, colors,
                                  [0.1, 0.2, 0.3], h, w)
            assert np.allclose(img, ref, atol=1e-12, rtol=0)

    def test_empty_scene_is_background(self):
        img, t_end, n = forward(np.zeros(0, dtype=np.int64), np.zeros((0, 2)),
                                np.zeros((0, 3)), np.zeros(0), np.zeros(0),
                                np.zeros((0, 3)), np.array([0.4, 0.5, 0.6]), 6, 7)
        assert np.allclose(img, [0.4, 0.5, 0.6])
        assert np.all(t_end == 1.0) and np.all(n == 0)

    def test_backend_agrees_with_reference(self, rng):
        h = w = 16
        means2d, conics, radii, opac, colors, depths = random_splats(rng, 25, w, h)
        order = sort_order(depths, means2d, radii, h, w)
        bg = np.array([0.0, 0.0, 0.0])
        img_a, t_a, n_a = forward(order, means2d, conics, radii, opac, colors, bg, h, w)
        img_b, t_b, n_b = forward_reference(order, means2d, conics, radii, opac,
                                            colors, bg, h, w)
        assert np.allclose(img_a, img_b, atol=1e-12, rtol=0)
        assert np.allclose(t_a, t_b, atol=1e-12, rtol=0)
        assert np.array_equal(n_a, n_b)


class TestBackwardKernel:
    def _loss_and_grads(self, rng, h=10, w=10, n=8):
        means2d, conics, radii, opac, colors, depths = random_splats(rng, n, w, h)
        order = sort_order(depths, means2d, radii, h, w)
        bg = np.array([0.3, 0.1, 0.2])
        target = rng.uniform(0, 1, (h, w, 3))

        def loss_of(m2d=means2d, con=conics, op=opac, col=colors, b=bg):
            img, _, _ = forward_reference(order, m2d, con, radii, op, col, b, h, w)
            return float(np.sum((img - target) ** 2))

        img, t_end, _ = forward(order, means2d, conics, radii, opac, colors, bg, h, w)
        g_img = 2.0 * (img - target)
        grads = backward(g_img, order, means2d, conics, radii, opac, colors,
                         bg, t_end, img)
        return loss_of, grads, (means2d, conics, opac, colors, bg)

    def test_matches_finite_differences(self, rng):
        loss_of, grads, (means2d, conics, opac, colors, bg) = self._loss_and_grads(rng)
        g_m2d, g_con, g_op, g_col, g_bg = grads

        # atol floor absorbs central-difference roundoff (~eps_mach*loss/eps)
        # on near-zero gradients of barely-visible splats
        def close(ad, fd):
            return np.allclose(ad, fd, rtol=1e-4, atol=1e-8)

        assert close(g_m2d, fd_grad(lambda m: loss_of(m2d=m), means2d, eps=1e-6))
        assert close(g_con, fd_grad(lambda c: loss_of(con=c), conics, eps=1e-6))
        assert close(g_op, fd_grad(lambda o: loss_of(op=o), opac, eps=1e-6))
        assert close(g_col, fd_grad(lambda c: loss_of(col=c), colors, eps=1e-6))
        assert close(g_bg, fd_grad(lambda b: loss_of(b=b), bg, eps=1e-6))

    def test_backend_agrees_with_reference(self, rng):
        h = w = 14
        means2d, conics, radii, opac, colors, depths = random_splats(rng, 18, w, h)
        order = sort_order(depths, means2d, radii, h, w)
        bg = np.array([0.2, 0.2, 0.2])
        img, t_end, _ = forward(order, means2d, conics, radii, opac, colors, bg, h, w)
        g_img = np.cos(img)  # arbitrary smooth upstream signal
        got = backward(g_img, order, means2d, conics, radii, opac, colors, bg, t_end, img)
        ref = backward_reference(g_img, order, means2d, conics, radii, opac,
                                 colors, bg, t_end, img)
        for a, b in zip(got, ref):
            assert np.allclose(a, b, atol=1e-12, rtol=0)

    def test_deterministic_across_runs(self, rng):
        h = w = 12
        means2d, conics, radii, opac, colors, depths = random_splats(rng, 15, w, h)
        order = sort_order(depths, means2d, radii, h, w)
        bg = np.zeros(3)
        img, t_end, _ = forward(order, means2d, conics, radii, opac, colors, bg, h, w)
        g_img = np.ones_like(img)
        runs = [backward(g_img, order, means2d, conics, radii, opac, colors,
                         bg, t_end, img) for _ in range(2)]
        for a, b in zip(*runs):
            assert np.array_equal(a, b)


class TestRasterizeNode:
    def test_fused_node_gradcheck(self, rng):
        h = w = 8
        means2d, conics, radii, opac, colors, depths = random_splats(rng, 6, w, h)
        order = sort_order(depths, means2d, radii, h, w)
        target = rng.uniform(0, 1, (h, w, 3))
        params = {"m2d": means2d, "con": conics, "op": opac, "col": colors,
                  "bg": np.array([0.1, 0.3, 0.2])}

        def f(tape, l):
            node, _, _ = rasterize_t(l["m2d"], l["con"], l["op"], l["col"],
                                     l["bg"], order, radii, h, w)
            # mean-scale loss keeps finite-difference roundoff well under
            # the checker's relative floor
            return T.reduce_mean(T.powc(T.sub(node, target), 2.0))

        assert T.grad_check(f, params, eps=1e-6, max_per_block=40) < 1e-4
