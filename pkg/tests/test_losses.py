import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pantext import losses as L
from pantext.anchors import MatchConfig, generate_anchors, AnchorSpec
from pantext.errors import ShapeError
from pantext.geometry import AxisRect, quad_decode, rect_decode
from pantext.oracles import central_difference


def _rel(a, b):
    return np.abs(a - b).max() / max(np.abs(a).max(), np.abs(b).max(), 1e-8)


class TestSoftmaxCe:
    def test_symmetric(self):
        assert L.softmax_ce([0.0, 0.0], 0)[0] == pytest.approx(math.log(2), abs=1e-15)

    def test_extreme_logits(self):
        loss, grad = L.softmax_ce([100.0, -100.0], 0)
        assert 0.0 <= loss < 1e-80 and np.isfinite(grad).all()
        loss, _ = L.softmax_ce([100.0, -100.0], 1)
        assert loss == pytest.approx(200.0)

    def test_gradient_is_softmax_minus_onehot(self):
        z = np.array([0.3, -1.2])
        _, g = L.softmax_ce(z, 1)
        p = np.exp(z) / np.exp(z).sum()
        np.testing.assert_allclose(g, p - [0, 1], atol=1e-15)

    @settings(max_examples=100)
    @given(st.floats(-8, 8), st.floats(-8, 8), st.integers(0, 1))
    def test_fd_gradient(self, a, b, label):
        z = np.array([a, b])
        _, g = L.softmax_ce(z, label)
        num = central_difference(lambda v: L.softmax_ce(v, label)[0], z, 1e-6)
        assert _rel(g, num) < 1e-6

    def test_batch_mean(self):
        logits = np.array([[0.0, 0.0], [2.0, -1.0]])
        loss, g = L.softmax_ce_batch(logits, [1, 0])
        want = (L.softmax_ce(logits[0], 1)[0] + L.softmax_ce(logits[1], 0)[0]) / 2
        assert loss == pytest.approx(want, abs=1e-15)
        np.testing.assert_allclose(g[0], L.softmax_ce(logits[0], 1)[1] / 2)

    def test_batch_empty(self):
        assert L.softmax_ce_batch(np.zeros((0, 2)), [])[0] == 0.0


class TestSmoothL1:
    def test_equal(self):
        assert L.smooth_l1([1.0, 2.0], [1.0, 2.0])[0] == 0.0

    def test_quadratic_branch(self):
        assert L.smooth_l1([0.5], [0.0])[0] == 0.125

    def test_linear_branch(self):
        loss, g = L.smooth_l1([2.0], [0.0])
        assert loss == 1.5 and g.tolist() == [1.0]
        assert L.smooth_l1([-3.0], [0.0])[1].tolist() == [-1.0]

    def test_continuity_at_one(self):
        assert L.smooth_l1([1.0 - 1e-12], [0.0])[0] == pytest.approx(L.smooth_l1([1.0], [0.0])[0], abs=1e-11)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            L.smooth_l1([1.0, 2.0], [1.0])

    def test_fd_gradient(self, rng):
        for _ in range(50):
            t = rng.normal(size=8)
            x = rng.normal(0, 1.5, size=8)
            x[np.abs(np.abs(x - t) - 1) < 1e-4] += 0.01  # stay off the kink
            num = central_difference(lambda v: L.smooth_l1(v, t)[0], x, 1e-6)
            assert _rel(L.smooth_l1(x, t)[1], num) < 1e-6


class TestBinaryCe:
    def test_zero_logits(self):
        t = (np.arange(196).reshape(14, 14) % 3 == 0).astype(float)
        assert L.binary_ce(np.zeros((14, 14)), t)[0] == pytest.approx(math.log(2), abs=1e-15)

    def test_confident_correct(self):
        t = (np.arange(196).reshape(14, 14) % 2).astype(float)
        loss, g = L.binary_ce(np.where(t == 1, 40.0, -40.0), t)
        assert 0.0 <= loss < 1e-15 and np.isfinite(g).all()

    def test_gradient_formula(self, rng):
        z = rng.normal(size=(14, 14))
        t = (rng.random((14, 14)) > 0.5).astype(float)
        _, g = L.binary_ce(z, t)
        np.testing.assert_allclose(g, (1 / (1 + np.exp(-z)) - t) / 196, atol=1e-17)

    def test_fd_gradient_full_size(self, rng):
        z = rng.normal(0, 3, size=(14, 14))
        t = (rng.random((14, 14)) > 0.5).astype(float)
        num = central_difference(lambda v: L.binary_ce(v, t)[0], z, 1e-6)
        assert _rel(L.binary_ce(z, t)[1], num) < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            L.binary_ce(np.zeros((14, 14)), np.zeros((7, 7)))


class TestStageLosses:
    def test_two_anchor_hand_value(self):
        logits = np.array([[0.2, 1.1], [0.4, -0.3]])
        pred = np.array([[0.1, -0.2, 0.05, 1.6], [9, 9, 9, 9]], dtype=float)
        target = np.array([[0, 0.3, 0, 0.1], [0, 0, 0, 0]], dtype=float)
        total, parts, _ = L.rpn_loss({"P2": L.StageBatch(logits, np.array([1, 0]), pred, target)})
        ce = (math.log(math.exp(0.2) + math.exp(1.1)) - 1.1 + math.log(math.exp(0.4) + math.exp(-0.3)) - 0.4) / 2
        loc = 0.005 + 0.125 + 0.00125 + 1.0
        assert total == pytest.approx(ce + 3 * loc, abs=1e-12)
        assert parts["P2"]["loc"] == pytest.approx(loc, abs=1e-15)

    def test_perfect_predictions(self):
        logits = np.array([[-50.0, 50.0], [50.0, -50.0]])
        tgt = np.ones((2, 4))
        total, _, _ = L.rpn_loss({"P3": L.StageBatch(logits, np.array([1, 0]), tgt, tgt)})
        assert total < 1e-20

    def test_no_positives_zero_loc(self):
        b = L.StageBatch(np.zeros((3, 2)), np.zeros(3, int), np.full((3, 4), 5.0), np.zeros((3, 4)))
        total, parts, (g_cls, g_loc) = L.frcnn_loss(L.StageBatch(b.cls_logits, b.labels, np.full((3, 8), 5.0),
                                                                   np.zeros((3, 8))))
        assert parts["loc"] == 0.0 and np.all(g_loc == 0)
        assert total == pytest.approx(math.log(2))

    def test_rpn_sums_levels(self, rng):
        levels = {lv: L.StageBatch(rng.normal(size=(4, 2)), np.array([1, 0, 1, 0]), rng.normal(size=(4, 4)),
                                   rng.normal(size=(4, 4))) for lv in ("P2", "P3", "P4")}
        total, parts, _ = L.rpn_loss(levels)
        assert total == pytest.approx(sum(p["total"] for p in parts.values()), abs=1e-14)

    def test_multitask_gradients(self, rng):
        logits = rng.normal(size=(6, 2))
        labels = np.array([1, 1, 0, 0, 1, 0])
        pred, target = rng.normal(size=(6, 8)), rng.normal(size=(6, 8))
        _, _, g_cls, g_loc = L.multitask_loss(logits, labels, pred, target, 1.0)
        f_cls = lambda v: L.multitask_loss(v, labels, pred, target, 1.0)[0]
        f_loc = lambda v: L.multitask_loss(logits, labels, v, target, 1.0)[0]
        assert _rel(g_cls, central_difference(f_cls, logits)) < 1e-6
        assert _rel(g_loc, central_difference(f_loc, pred)) < 1e-6
        assert np.all(g_loc[labels == 0] == 0)

    def test_mask_loss_mean(self, rng):
        z = rng.normal(size=(3, 14, 14))
        t = (rng.random((3, 14, 14)) > 0.5).astype(float)
        loss, grads = L.mask_loss(z, t)
        assert loss == pytest.approx(np.mean([L.binary_ce(a, b)[0] for a, b in zip(z, t)]))
        assert len(grads) == 3 and L.mask_loss([], [])[0] == 0.0


class TestTotal:
    def test_mask_weight(self):
        assert L.total_loss(1.0, 1.0, 32.0).l_total == 3.0

    def test_zero(self):
        assert L.total_loss(0.0, 0.0, 0.0).l_total == 0.0

    def test_reconstruction(self, rng):
        for a, b, c in rng.uniform(0, 10, size=(100, 3)):
            assert abs(L.total_loss(a, b, c).l_total - (a + b + 0.03125 * c)) <= 1e-12

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            L.LossConfig(lambda_mask=-1.0)


class TestTargets:
    def test_mask_full_cover(self):
        q = AxisRect(-5, -5, 50, 50).corners()
        assert np.all(L.make_mask_target((0, 0, 14, 14), q) == 1)

    def test_mask_disjoint(self):
        q = AxisRect(100, 100, 110, 110).corners()
        assert np.all(L.make_mask_target((0, 0, 14, 14), q) == 0)

    def test_mask_left_half(self):
        m = L.make_mask_target((0, 0, 28, 14), AxisRect(0, 0, 14, 14).corners())
        assert m[:, :7].all() and not m[:, 7:].any()

    def test_mask_boundary_inclusive(self):
        # the right edge of the quad passes exactly through a column of cell centres
        m = L.make_mask_target((0, 0, 14, 14), AxisRect(0, 0, 6.5, 14).corners())
        assert m[:, :7].all() and not m[:, 7:].any()

    def test_rpn_targets_encode(self):
        anchors = generate_anchors(AnchorSpec(), "P2", 8, 8)
        gt = np.array([[10.0, 10.0, 40.0, 30.0]])
        idx, labels, targets = L.rpn_targets(anchors, gt, seed=0)
        assert labels.sum() >= 1 and labels.size == min(256, len(anchors))
        pos = idx[labels == 1]
        np.testing.assert_allclose(rect_decode(targets[labels == 1], anchors[pos]), np.repeat(gt, pos.size, 0),
                                   atol=1e-9)

    def test_frcnn_targets(self):
        gtq = np.array([[[10, 12], [50, 10], [52, 30], [11, 33]]], dtype=float)
        props = np.array([[10, 10, 52, 33], [9, 11, 50, 32], [100, 100, 120, 120]], dtype=float)
        idx, labels, targets, masks = L.frcnn_targets(props, gtq, MatchConfig(), seed=0)
        assert labels.tolist() == [1, 1, 0]
        for k in range(2):
            np.testing.assert_allclose(quad_decode(targets[k], props[idx[k]]), gtq[0], atol=1e-9)
        assert len(masks) == 2 and masks[0].shape == (14, 14) and masks[0].sum() > 150

    def test_degenerate_proposal(self):
        with pytest.raises(ShapeError):
            L.make_mask_target((0, 0, 0, 5), AxisRect(0, 0, 1, 1).corners())
