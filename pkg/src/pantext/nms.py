"""Greedy non-maximum suppression on rectangles and convex quadrilaterals.

Order is score descending with ties broken by ascending id; a box is
suppressed when its IoU with a kept box is strictly greater than the
threshold.
"""

from typing import NamedTuple

import numpy as np

from pantext._backend import kernels
from pantext.geometry import canonical_convex


class ScoredBox(NamedTuple):
    geometry: object  # (4,) rect or (4, 2) quad
    score: float
    id: int


def priority_order(scores, ids=None):
    """Indices sorting by (score desc, id asc)."""
    scores = np.asarray(scores, dtype=np.float64)
    if ids is None:
        ids = np.arange(scores.size)
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    return np.lexsort((np.asarray(ids), -scores))


def _check_thresh(t):
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"iou threshold must be in [0, 1], got {t}")


def nms_rect_arrays(boxes, scores, iou_thresh, ids=None):
    """Array form of :func:`nms_rect`; returns positions into ``boxes`` in keep order."""
    _check_thresh(iou_thresh)
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    order = priority_order(scores, ids)
    keep = kernels().nms_rects(np.ascontiguousarray(boxes[order]), float(iou_thresh))
    return order[keep]


def nms_quad_arrays(quads, scores, iou_thresh, ids=None):
    """Array form of :func:`nms_skewed`; quads must be convex."""
    _check_thresh(iou_thresh)
    quads = np.asarray(quads, dtype=np.float64).reshape(-1, 4, 2)
    order = priority_order(scores, ids)
    canon = np.stack([canonical_convex(q) for q in quads[order]]) if len(order) else quads[:0]
    keep = kernels().nms_quads(np.ascontiguousarray(canon), float(iou_thresh))
    return order[keep]


def nms_rect(boxes, iou_thresh):
    """Standard NMS over :class:`ScoredBox` rects; returns kept ids in keep order."""
    if not boxes:
        _check_thresh(iou_thresh)
        return []
    ids = np.array([b.id for b in boxes])
    pos = nms_rect_arrays([b.geometry for b in boxes], [b.score for b in boxes], iou_thresh, ids)
    return ids[pos].tolist()


def nms_skewed(boxes, iou_thresh):
    """Skewed NMS: greedy suppression with polygon IoU between quads."""
    if not boxes:
        _check_thresh(iou_thresh)
        return []
    ids = np.array([b.id for b in boxes])
    pos = nms_quad_arrays([b.geometry for b in boxes], [b.score for b in boxes], iou_thresh, ids)
    return ids[pos].tolist()


def top_n(boxes, n):
    """The ``n`` best boxes by (score desc, id asc)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    order = sorted(boxes, key=lambda b: (-b.score, b.id))
    return order[:n]
