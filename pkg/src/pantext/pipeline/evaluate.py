"""Local detection evaluation: greedy one-to-one IoU matching.

Per image, detections are visited by descending score (ties by quad
coordinates, so input order never matters). A detection matches the
unmatched care ground truth with the highest polygon IoU if that IoU is at
least the threshold. Otherwise, if it reaches the threshold against an
ignored ("###") ground truth, it is left out of the precision count.
Counts are summed over images before computing R, P and F; an empty
denominator gives 0.
"""

from dataclasses import dataclass, field

import numpy as np

from pantext.errors import PanTextError
from pantext.geometry import as_quad, canonical_convex, min_area_quad, quad_iou


@dataclass
class ImageMatches:
    matches: list = field(default_factory=list)  # (det index, gt index, iou)
    ignored_dets: list = field(default_factory=list)
    num_care: int = 0
    num_counted: int = 0


@dataclass
class EvalReport:
    recall: float
    precision: float
    f_measure: float
    num_matched: int
    num_care: int
    num_counted: int
    per_image: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "recall": self.recall, "precision": self.precision, "f_measure": self.f_measure,
            "matched": self.num_matched, "care_gt": self.num_care, "counted_dets": self.num_counted,
            "per_image": {k: {"matches": [[int(d), int(g), float(u)] for d, g, u in v.matches],
                              "ignored_dets": [int(d) for d in v.ignored_dets]}
                          for k, v in sorted(self.per_image.items())},
        }


def f_measure(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _gt_quad(points):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 4:
        return canonical_convex(pts)
    # curved ground truth: compare through its minimum-area enclosing rectangle
    return canonical_convex(min_area_quad(pts))


def _det_parts(d):
    if hasattr(d, "quad"):
        return as_quad(d.quad), float(d.score)
    quad, score = d
    return as_quad(quad), float(score)


def match_image(dets, gts, iou_thresh):
    parts = [_det_parts(d) for d in dets]
    gt_quads = [_gt_quad(g.points) for g in gts]
    ignore = np.array([bool(g.ignore) for g in gts], dtype=bool)
    order = sorted(range(len(parts)), key=lambda i: (-parts[i][1], tuple(parts[i][0].ravel())))
    taken = np.zeros(len(gts), dtype=bool)
    out = ImageMatches(num_care=int((~ignore).sum()))
    for i in order:
        quad = parts[i][0]
        ious = np.array([quad_iou(quad, g) for g in gt_quads]) if gt_quads else np.zeros(0)
        care = np.flatnonzero(~ignore & ~taken)
        if care.size:
            best = care[np.argmax(ious[care])]
            if ious[best] >= iou_thresh:
                taken[best] = True
                out.matches.append((i, int(best), float(ious[best])))
                out.num_counted += 1
                continue
        if np.any(ious[ignore] >= iou_thresh):
            out.ignored_dets.append(i)
            continue
        out.num_counted += 1
    return out


def evaluate(dets, gts, iou=0.5):
    """``dets`` and ``gts`` map image key -> detections / :class:`GtItem` lists.

    Detections are :class:`Detection` objects or ``(quad, score)`` pairs.
    Images with ground truth but no detections count toward recall.
    """
    unknown = sorted(set(dets) - set(gts))
    if unknown:
        raise PanTextError(f"detections for unknown image keys: {unknown}")
    per_image = {}
    matched = care = counted = 0
    for key in sorted(gts):
        m = match_image(dets.get(key, []), gts[key], iou)
        per_image[key] = m
        matched += len(m.matches)
        care += m.num_care
        counted += m.num_counted
    r = matched / care if care else 0.0
    p = matched / counted if counted else 0.0
    return EvalReport(r, p, f_measure(p, r), matched, care, counted, per_image)
