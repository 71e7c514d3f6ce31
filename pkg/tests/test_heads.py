import math

import numpy as np
import pytest

from proctrack import autodiff as ad
from proctrack.autodiff import ShapeMismatchError, Tensor
from proctrack.encoder import EncoderOutput
from proctrack.heads import (
    GoldStep, STATUS_GONE, STATUS_KNOWN, STATUS_UNKNOWN, init_head_params,
    joint_loss, resolve_gold_span, span_head, status_class_of, status_head,
)

from conftest import check_gradients, leaf


def enc_out(arr):
    return EncoderOutput(hidden=Tensor(arr, requires_grad=True))


class TestStatusHead:
    def test_zero_weights_uniform(self, rng):
        out = enc_out(rng.normal(0, 1, (5, 8)))
        pred = status_head(out, Tensor(np.zeros((8, 3))))
        np.testing.assert_allclose(pred.probs, [1 / 3] * 3, atol=1e-12)

    def test_analytic_softmax(self):
        # CLS row picks out logits (ln2, ln1, ln1) -> (0.5, 0.25, 0.25)
        hidden = np.zeros((4, 3))
        hidden[0] = [1.0, 0.0, 0.0]
        w = np.array([[math.log(2), 0.0, 0.0]] + [[0.0, 0.0, 0.0]] * 2)
        pred = status_head(enc_out(hidden), Tensor(w))
        np.testing.assert_allclose(pred.probs, [0.5, 0.25, 0.25], atol=1e-12)

    def test_argmax_shift_invariant(self, rng):
        hidden = rng.normal(0, 1, (5, 8))
        w = rng.normal(0, 1, (8, 3))
        base = status_head(enc_out(hidden), Tensor(w)).argmax
        # add a constant column: logits all shift by c
        cls = hidden[0]
        shifted = w + np.outer(cls / (cls @ cls), np.full(3, 3.7))
        assert status_head(enc_out(hidden), Tensor(shifted)).argmax == base

    def test_shape_check(self, rng):
        with pytest.raises(ShapeMismatchError):
            status_head(enc_out(rng.normal(0, 1, (5, 8))), Tensor(np.zeros((8, 4))))

    def test_gradient_wrt_weights(self, rng):
        out = enc_out(rng.normal(0, 1, (5, 8)))
        w = leaf(rng, 8, 3)
        check_gradients(lambda: ad.cross_entropy(
            status_head(out, w).probs_t, 1), [w])


class TestSpanHead:
    def test_zero_weights_uniform(self, rng):
        out = enc_out(rng.normal(0, 1, (6, 8)))
        pred = span_head(out, Tensor(np.zeros((8, 1))), Tensor(np.zeros((8, 1))))
        np.testing.assert_allclose(pred.start_probs, np.full(6, 1 / 6), atol=1e-12)
        np.testing.assert_allclose(pred.end_probs, np.full(6, 1 / 6), atol=1e-12)

    def test_identical_rows_identical_probs(self, rng):
        hidden = rng.normal(0, 1, (6, 8))
        hidden[2] = hidden[4]
        pred = span_head(enc_out(hidden), leaf(rng, 8, 1), leaf(rng, 8, 1))
        assert pred.start_probs[2] == pytest.approx(pred.start_probs[4], abs=1e-12)

    def test_matches_direct_formula(self, rng):
        hidden = rng.normal(0, 1, (6, 8))
        ws, we = rng.normal(0, 1, (8, 1)), rng.normal(0, 1, (8, 1))
        pred = span_head(enc_out(hidden), Tensor(ws), Tensor(we))
        for w, probs in [(ws, pred.start_probs), (we, pred.end_probs)]:
            logits = (hidden @ w).ravel()
            oracle = np.exp(logits) / np.exp(logits).sum()
            np.testing.assert_allclose(probs, oracle, atol=1e-9)
            assert probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_shape_check(self, rng):
        out = enc_out(rng.normal(0, 1, (6, 8)))
        with pytest.raises(ShapeMismatchError):
            span_head(out, Tensor(np.zeros((7, 1))), Tensor(np.zeros((8, 1))))


class TestJointLoss:
    def _one_hot_preds(self, gold):
        status = np.full(3, 1e-12)
        status[gold.status_class] = 1.0
        start = np.full(6, 1e-12)
        end = np.full(6, 1e-12)
        if gold.span:
            start[gold.span[0]] = 1.0
            end[gold.span[1]] = 1.0
        from proctrack.heads import SpanPrediction, StatusPrediction
        return (StatusPrediction(Tensor(status)),
                SpanPrediction(Tensor(start), Tensor(end)))

    def test_perfect_prediction_zero(self):
        gold = GoldStep(status_class=STATUS_KNOWN, span=(2, 4))
        status, span = self._one_hot_preds(gold)
        assert float(joint_loss(status, span, gold).data) == pytest.approx(0.0)

    def test_uniform_status_gone_is_ln3(self):
        from proctrack.heads import SpanPrediction, StatusPrediction
        status = StatusPrediction(Tensor(np.full(3, 1 / 3)))
        span = SpanPrediction(Tensor(np.full(6, 1 / 6)), Tensor(np.full(6, 1 / 6)))
        loss = joint_loss(status, span, GoldStep(status_class=STATUS_GONE))
        assert float(loss.data) == pytest.approx(math.log(3), abs=1e-12)

    def test_random_case_matches_hand_sum(self, rng):
        from proctrack.heads import SpanPrediction, StatusPrediction
        sp = rng.dirichlet(np.ones(3))
        st = rng.dirichlet(np.ones(6))
        en = rng.dirichlet(np.ones(6))
        gold = GoldStep(status_class=STATUS_KNOWN, span=(1, 3))
        loss = joint_loss(StatusPrediction(Tensor(sp)),
                          SpanPrediction(Tensor(st), Tensor(en)), gold)
        expected = -math.log(sp[2]) - math.log(st[1]) - math.log(en[3])
        assert float(loss.data) == pytest.approx(expected, abs=1e-9)

    def test_span_terms_skipped_for_gone_and_unknown(self, rng):
        from proctrack.heads import SpanPrediction, StatusPrediction
        status = StatusPrediction(Tensor(rng.dirichlet(np.ones(3))))
        span = SpanPrediction(Tensor(rng.dirichlet(np.ones(6))),
                              Tensor(rng.dirichlet(np.ones(6))))
        for cls in (STATUS_GONE, STATUS_UNKNOWN):
            loss = joint_loss(status, span, GoldStep(status_class=cls, span=(0, 1)))
            assert float(loss.data) == pytest.approx(
                -math.log(status.probs[cls]), abs=1e-9)

    def test_unresolvable_gold_span_skips_span_terms(self, rng):
        from proctrack.heads import SpanPrediction, StatusPrediction
        status = StatusPrediction(Tensor(rng.dirichlet(np.ones(3))))
        span = SpanPrediction(Tensor(rng.dirichlet(np.ones(6))),
                              Tensor(rng.dirichlet(np.ones(6))))
        loss = joint_loss(status, span, GoldStep(status_class=STATUS_KNOWN, span=None))
        assert float(loss.data) == pytest.approx(-math.log(status.probs[2]), abs=1e-9)

    def test_loss_nonnegative(self, rng):
        from proctrack.heads import SpanPrediction, StatusPrediction
        for _ in range(20):
            gold = GoldStep(status_class=int(rng.integers(0, 3)), span=(0, 2))
            loss = joint_loss(
                StatusPrediction(Tensor(rng.dirichlet(np.ones(3)))),
                SpanPrediction(Tensor(rng.dirichlet(np.ones(5))),
                               Tensor(rng.dirichlet(np.ones(5)))), gold)
            assert float(loss.data) >= 0.0

    def test_span_gradient_only_for_known_gold(self, rng):
        out = enc_out(rng.normal(0, 1, (6, 8)))
        w_status, w_start, w_end = leaf(rng, 8, 3), leaf(rng, 8, 1), leaf(rng, 8, 1)

        def run(gold):
            for w in (w_status, w_start, w_end):
                w.grad = None
            loss = joint_loss(status_head(out, w_status),
                              span_head(out, w_start, w_end), gold)
            loss.backward()

        run(GoldStep(status_class=STATUS_GONE))
        assert w_start.grad is None and w_end.grad is None
        run(GoldStep(status_class=STATUS_KNOWN, span=(2, 3)))
        assert np.any(w_start.grad != 0) and np.any(w_end.grad != 0)


class TestGoldSpanResolution:
    PARA = "the water flows to the leaf near the leaf".split()

    def test_first_occurrence_wins(self):
        assert resolve_gold_span(["the", "leaf"], self.PARA) == (4, 5)

    def test_single_token(self):
        assert resolve_gold_span(["water"], self.PARA) == (1, 1)

    def test_absent_returns_none(self):
        assert resolve_gold_span(["root"], self.PARA) is None
        assert resolve_gold_span([], self.PARA) is None


class TestStatusClassOf:
    def test_mapping(self):
        assert status_class_of("-") == STATUS_GONE
        assert status_class_of("?") == STATUS_UNKNOWN
        assert status_class_of("leaf") == STATUS_KNOWN
