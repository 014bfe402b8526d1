"""Loss fixtures and properties.

Expected values are computed from the defining formulas inline (math.log
etc.), never copied from the implementation under test.
"""

import math
from dataclasses import dataclass

import numpy as np
import pytest

from faultcast.losses import (
    ClassWeights,
    batch_adjoints,
    batch_loss,
    class_weights,
    l2_penalty,
    pair_loss,
    pair_similarity,
    pair_target,
    segment_loss,
    segment_loss_grad,
    stepwise_loss,
    stepwise_loss_grad,
)
from faultcast.model import ModelDims, init_model, param_items
from faultcast.num import make_rng

ATOL = 1e-10


def weights_of(*w):
    w = np.asarray(w, dtype=np.float64)
    return ClassWeights(np.full_like(w, 0.5), w)


@dataclass
class FakePrediction:
    embedding: np.ndarray
    label_probs: np.ndarray
    step_scores: np.ndarray
    step_hidden: np.ndarray = None


class TestClassWeights:
    def test_inverse_e_frequency_gives_unit_weight(self):
        # 25 of 68 positives is within 1/1000 of 1/e; use an exact 1/e via
        # direct construction instead: p = 1/e cannot be hit with integer
        # counts, so check the formula at the nearest representable point.
        labels = np.zeros((math.e.__trunc__() * 100, 1))
        n = labels.shape[0]
        k = round(n / math.e)
        labels[:k, 0] = 1.0
        cw = class_weights(labels)
        assert abs(cw.weight[0] - (-math.log(k / n))) < ATOL

    def test_absent_label_weight_one(self):
        labels = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        cw = class_weights(labels)
        assert cw.frequency[1] == 0.0
        assert cw.weight[1] == 1.0

    def test_half_frequency(self):
        labels = np.array([[1.0], [0.0], [1.0], [0.0]])
        cw = class_weights(labels)
        assert abs(cw.weight[0] - math.log(2.0)) < ATOL

    def test_always_present_label_warns_and_weights_zero(self):
        labels = np.ones((4, 1))
        with pytest.warns(UserWarning, match="weight 0"):
            cw = class_weights(labels)
        assert cw.weight[0] == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            class_weights(np.zeros((0, 3)))

    def test_weight_monotone_in_frequency(self):
        rng = make_rng(3)
        p = np.sort(rng.uniform(0.01, 1.0, size=50))
        n = 1000
        labels = np.zeros((n, 50))
        counts = np.maximum(1, (p * n).astype(int))
        for l, k in enumerate(counts):
            labels[:k, l] = 1.0
        cw = class_weights(labels)
        order = np.argsort(cw.frequency)
        sorted_w = cw.weight[order]
        assert np.all(np.diff(sorted_w) <= 1e-12)


class TestSegmentLoss:
    def test_negative_only_term(self):
        got = segment_loss(np.array([0.5]), np.array([0.0]), weights_of(1.0))
        assert abs(got - math.log(2.0)) < ATOL

    def test_positive_only_term(self):
        got = segment_loss(np.array([0.5]), np.array([1.0]), weights_of(1.0))
        assert abs(got - math.log(2.0)) < ATOL

    def test_weighted_hand_case(self):
        got = segment_loss(
            np.array([0.5, 0.25]), np.array([1.0, 0.0]), weights_of(2.0, 1.0)
        )
        expected = 2.0 * math.log(2.0) - math.log(0.75)
        assert abs(got - expected) < ATOL

    def test_non_negative_and_zero_at_corners(self):
        rng = make_rng(4)
        for _ in range(50):
            probs = rng.uniform(1e-6, 1 - 1e-6, size=5)
            labels = (rng.uniform(size=5) < 0.5).astype(float)
            w = weights_of(*rng.uniform(0.1, 3.0, size=5))
            assert segment_loss(probs, labels, w) >= 0.0
        near = np.where(np.array([1.0, 0.0]) > 0, 1 - 1e-12, 1e-12)
        tiny = segment_loss(near, np.array([1.0, 0.0]), weights_of(1.0, 1.0))
        assert tiny < 1e-10

    def test_grad_matches_finite_differences(self):
        rng = make_rng(5)
        probs = rng.uniform(0.1, 0.9, size=4)
        labels = (rng.uniform(size=4) < 0.5).astype(float)
        w = weights_of(*rng.uniform(0.5, 2.0, size=4))
        grad = segment_loss_grad(probs, labels, w)
        eps = 1e-7
        for k in range(4):
            up, down = probs.copy(), probs.copy()
            up[k] += eps
            down[k] -= eps
            numeric = (segment_loss(up, labels, w) - segment_loss(down, labels, w)) / (2 * eps)
            assert abs(numeric - grad[k]) < 1e-5


class TestStepwiseLoss:
    def test_zero_at_exact_corners(self):
        target = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert stepwise_loss(target, target) == 0.0

    def test_quarter_scores_against_zeros(self):
        scores = np.full((3, 2), 0.25)
        assert abs(stepwise_loss(scores, np.zeros((3, 2))) - 0.0625) < ATOL

    def test_single_entry(self):
        got = stepwise_loss(np.array([[0.25]]), np.array([[1.0]]))
        assert abs(got - 0.5625) < ATOL

    def test_bounded_unit_interval(self):
        rng = make_rng(6)
        for _ in range(30):
            scores = rng.uniform(1e-9, 1 - 1e-9, size=(4, 3))
            target = (rng.uniform(size=(4, 3)) < 0.5).astype(float)
            val = stepwise_loss(scores, target)
            assert 0.0 <= val <= 1.0

    def test_grad_matches_finite_differences(self):
        rng = make_rng(7)
        scores = rng.uniform(0.1, 0.9, size=(2, 3))
        target = (rng.uniform(size=(2, 3)) < 0.5).astype(float)
        grad = stepwise_loss_grad(scores, target)
        eps = 1e-7
        flat = scores.ravel()
        gflat = grad.ravel()
        for k in range(flat.size):
            keep = flat[k]
            flat[k] = keep + eps
            up = stepwise_loss(scores, target)
            flat[k] = keep - eps
            down = stepwise_loss(scores, target)
            flat[k] = keep
            assert abs((up - down) / (2 * eps) - gflat[k]) < 1e-6


class TestPairTerms:
    def test_identical_embeddings_similarity_one(self):
        g = np.array([0.3, -2.0])
        np.testing.assert_allclose(pair_similarity(g, g), 1.0)

    def test_log2_gap_gives_half(self):
        s = pair_similarity(np.array([math.log(2.0)]), np.array([0.0]))
        np.testing.assert_allclose(s, [0.5], atol=ATOL)

    def test_hand_case(self):
        s = pair_similarity(np.array([1.0, -1.0]), np.array([0.0, 1.0]))
        np.testing.assert_allclose(s, [math.exp(-1.0), math.exp(-2.0)], atol=ATOL)

    def test_symmetry(self):
        rng = make_rng(8)
        a, b = rng.normal(size=4), rng.normal(size=4)
        np.testing.assert_array_equal(pair_similarity(a, b), pair_similarity(b, a))

    def test_pair_loss_corners(self):
        assert pair_loss(np.array([1.0]), np.array([1.0])) == 0.0
        assert abs(pair_loss(np.array([0.5]), np.array([0.0])) - 0.25) < ATOL

    def test_pair_loss_hand_case(self):
        got = pair_loss(np.array([0.5, 0.1]), np.array([1.0, 0.0]))
        assert abs(got - 0.13) < ATOL

    def test_pair_target_is_agreement(self):
        t = pair_target(np.array([1.0, 0.0, 1.0]), np.array([1.0, 1.0, 0.0]))
        np.testing.assert_array_equal(t, [1.0, 0.0, 0.0])


class TestL2Penalty:
    def make_model(self):
        return init_model(make_rng(0), ModelDims(2, 1, 1, 2, 4))

    def test_zero_coefficient(self):
        assert l2_penalty(self.make_model(), 0.0) == 0.0

    def test_zero_weights(self):
        model = self.make_model()
        for _, arr in param_items(model):
            arr[...] = 0.0
        assert l2_penalty(model, 2.0) == 0.0

    def test_single_weight_matrix(self):
        model = self.make_model()
        for _, arr in param_items(model):
            arr[...] = 0.0
        model.encoder.w_f[0, :2] = (3.0, 4.0)
        assert abs(l2_penalty(model, 2.0) - 25.0) < ATOL

    def test_biases_excluded(self):
        model = self.make_model()
        for name, arr in param_items(model):
            arr[...] = 0.0 if ".w_" in name else 7.0
        model.out_bias[...] = 7.0
        assert l2_penalty(model, 1.0) == 0.0


def make_pred(rng, n, horizon=3, n_labels=2):
    g = rng.normal(size=(n, n_labels))
    y = 1.0 / (1.0 + np.exp(-g))
    h = rng.normal(size=(n, horizon, n_labels))
    o = (1.0 / (1.0 + np.exp(-h))) * y[:, None, :]
    return FakePrediction(g, y, o)


class TestBatchLoss:
    def test_single_sample_base_equals_segment_loss(self):
        rng = make_rng(9)
        pred = make_pred(rng, 1)
        labels = np.array([[1.0, 0.0]])
        steps = np.zeros((1, 3, 2))
        w = weights_of(1.0, 1.0)
        got = batch_loss("base", pred, labels, steps, w)
        expected = segment_loss(pred.label_probs[0], labels[0], w)
        assert abs(got.total - expected) < ATOL
        assert got.stepwise == 0.0 and got.pairwise == 0.0

    def test_localize_with_perfect_steps(self):
        rng = make_rng(10)
        pred = make_pred(rng, 2)
        labels = (pred.label_probs > 0.5).astype(float)
        w = weights_of(1.0, 1.0)
        got = batch_loss("localize", pred, labels, pred.step_scores.round(), w)
        near_corner = batch_loss(
            "localize",
            FakePrediction(
                pred.embedding,
                pred.label_probs,
                np.clip(pred.step_scores.round(), 1e-15, 1 - 1e-15),
            ),
            labels,
            pred.step_scores.round(),
            w,
        )
        assert abs(near_corner.stepwise) < 1e-12
        assert got.segment > 0.0

    def test_siamese_two_sample_hand_composition(self):
        rng = make_rng(11)
        pred = make_pred(rng, 2)
        labels = np.array([[1.0, 0.0], [1.0, 1.0]])
        steps = (pred.step_scores > 0.4).astype(float)
        w = weights_of(1.3, 0.7)
        beta = 0.3
        got = batch_loss("siamese", pred, labels, steps, w, beta=beta)

        ly = [segment_loss(pred.label_probs[i], labels[i], w) for i in range(2)]
        lo = [stepwise_loss(pred.step_scores[i], steps[i]) for i in range(2)]
        sim = pair_similarity(pred.embedding[0], pred.embedding[1])
        ls = pair_loss(sim, pair_target(labels[0], labels[1]))
        expected = beta * (ly[0] + ly[1] + lo[0] + lo[1]) + (1 - beta) * ls
        assert abs(got.total - expected) < ATOL

    def test_siamese_needs_two(self):
        rng = make_rng(12)
        pred = make_pred(rng, 1)
        with pytest.raises(ValueError, match="at least 2"):
            batch_loss(
                "siamese", pred, np.array([[1.0, 0.0]]), np.zeros((1, 3, 2)),
                weights_of(1.0, 1.0),
            )

    def test_order_invariance_of_siamese(self):
        rng = make_rng(13)
        pred = make_pred(rng, 4)
        labels = (rng.uniform(size=(4, 2)) < 0.5).astype(float)
        steps = (rng.uniform(size=(4, 3, 2)) < 0.3).astype(float)
        w = weights_of(1.0, 2.0)
        a = batch_loss("siamese", pred, labels, steps, w, beta=0.5)
        perm = [2, 0, 3, 1]
        shuffled = FakePrediction(
            pred.embedding[perm], pred.label_probs[perm], pred.step_scores[perm]
        )
        b = batch_loss("siamese", shuffled, labels[perm], steps[perm], w, beta=0.5)
        assert abs(a.total - b.total) < 1e-12

    def test_breakdown_total_is_component_sum(self):
        rng = make_rng(14)
        model = init_model(make_rng(1), ModelDims(2, 1, 1, 2, 5))
        pred = make_pred(rng, 3)
        labels = (rng.uniform(size=(3, 2)) < 0.5).astype(float)
        steps = (rng.uniform(size=(3, 3, 2)) < 0.5).astype(float)
        w = weights_of(1.0, 1.0)
        for kind in ("base", "localize", "siamese"):
            got = batch_loss(kind, pred, labels, steps, w, model=model, lam=0.7)
            parts = got.segment + got.stepwise + got.pairwise + got.reg
            assert abs(got.total - parts) < 1e-12
            assert got.reg > 0.0

    def test_adjoints_match_finite_differences(self):
        rng = make_rng(15)
        labels = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        steps = (rng.uniform(size=(3, 3, 2)) < 0.4).astype(float)
        w = weights_of(0.9, 1.8)
        for kind in ("base", "localize", "siamese"):
            pred = make_pred(rng, 3)
            dy, do, dg = batch_adjoints(kind, pred, labels, steps, w, beta=0.4)
            eps = 1e-7

            def value(p):
                return batch_loss(kind, p, labels, steps, w, beta=0.4).total

            for arr, grad in ((pred.label_probs, dy), (pred.step_scores, do)):
                flat, gflat = arr.ravel(), grad.ravel()
                for k in range(flat.size):
                    keep = flat[k]
                    flat[k] = keep + eps
                    up = value(pred)
                    flat[k] = keep - eps
                    down = value(pred)
                    flat[k] = keep
                    assert abs((up - down) / (2 * eps) - gflat[k]) < 1e-5
            flat, gflat = pred.embedding.ravel(), dg.ravel()
            for k in range(flat.size):
                keep = flat[k]
                flat[k] = keep + eps
                up = value(pred)
                flat[k] = keep - eps
                down = value(pred)
                flat[k] = keep
                assert abs((up - down) / (2 * eps) - gflat[k]) < 1e-5
