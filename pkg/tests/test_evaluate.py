import numpy as np
import pytest

from pantext.errors import PanTextError
from pantext.geometry import AxisRect
from pantext.pipeline.evaluate import evaluate, f_measure
from pantext.pipeline.gt import GtItem
from pantext.pipeline.infer import Detection

Q1 = AxisRect(0, 0, 10, 5).corners()
Q2 = Q1 + [20, 0]


def _gt(*quads, ignore=()):
    return [GtItem(q, "###" if i in ignore else "w", i in ignore) for i, q in enumerate(quads)]


class TestEvaluate:
    def test_identity(self):
        r = evaluate({"a": [(Q1, 0.9), (Q2, 0.8)]}, {"a": _gt(Q1, Q2)})
        assert (r.recall, r.precision, r.f_measure) == (1.0, 1.0, 1.0)

    def test_two_gt_one_det(self):
        r = evaluate({"a": [(Q1, 0.9)]}, {"a": _gt(Q1, Q2)})
        assert (r.recall, r.precision) == (0.5, 1.0) and r.f_measure == pytest.approx(2 / 3, abs=1e-15)

    def test_only_ignored_overlap(self):
        r = evaluate({"a": [(Q2, 0.9)]}, {"a": _gt(Q1, Q2, ignore=(1,))})
        assert (r.recall, r.precision, r.f_measure) == (0.0, 0.0, 0.0)
        assert r.num_counted == 0 and r.num_care == 1
        assert r.per_image["a"].ignored_dets == [0]

    def test_false_positive_counts(self):
        r = evaluate({"a": [(Q1, 0.9), (Q1 + [0, 50], 0.7)]}, {"a": _gt(Q1)})
        assert (r.recall, r.precision) == (1.0, 0.5)

    def test_one_to_one(self):
        # two detections on the same GT: only the higher-scored one matches
        r = evaluate({"a": [(Q1 + [0.1, 0], 0.6), (Q1, 0.9)]}, {"a": _gt(Q1)})
        assert r.per_image["a"].matches[0][0] == 1 and (r.num_matched, r.num_counted) == (1, 2)

    def test_threshold_inclusive(self):
        d = AxisRect(0, 0, 15, 5).corners()  # IoU 50 / 75
        assert evaluate({"a": [(d, 0.5)]}, {"a": _gt(Q1)}, iou=2 / 3).recall == 1.0

    def test_order_invariant(self, rng):
        gts = {"a": _gt(*[Q1 + [15 * k, 3 * k] for k in range(6)], ignore=(2,)),
               "b": _gt(Q1, Q2)}
        dets = {"a": [(Q1 + [15 * k + rng.uniform(-2, 2), 3 * k], float(s)) for k, s in
                      zip(range(7), [0.5, 0.9, 0.5, 0.7, 0.3, 0.9, 0.1])],
                "b": [(Q2, 0.4), (Q2 + 0.5, 0.4)]}
        base = evaluate(dets, gts).to_dict()
        for _ in range(10):
            shuffled = {k: [v[i] for i in rng.permutation(len(v))] for k, v in dets.items()}
            got = evaluate(shuffled, gts).to_dict()
            assert (got["recall"], got["precision"], got["matched"]) == (base["recall"], base["precision"],
                                                                         base["matched"])

    def test_missing_detections_count_for_recall(self):
        r = evaluate({}, {"a": _gt(Q1)})
        assert (r.recall, r.precision) == (0.0, 0.0)

    def test_unknown_key(self):
        with pytest.raises(PanTextError, match="zzz"):
            evaluate({"zzz": []}, {"a": _gt(Q1)})

    def test_detection_objects(self):
        r = evaluate({"a": [Detection(Q1, 0.9)]}, {"a": _gt(Q1)})
        assert r.f_measure == 1.0

    def test_curved_gt(self):
        # 14 points along the border of a 10 x 5 box
        top = [[x, 0] for x in np.linspace(0, 10, 7)]
        bottom = [[x, 5] for x in np.linspace(10, 0, 7)]
        gt = [GtItem(np.array(top + bottom, dtype=float), "w", False)]
        assert evaluate({"a": [(Q1, 0.9)]}, {"a": gt}).recall == 1.0


def test_f_measure():
    assert f_measure(0.0, 0.0) == 0.0
    assert f_measure(1.0, 0.5) == pytest.approx(2 / 3)
