"""Anchor lattices for P2/P3/P4, IoU-based labelling and mini-batch sampling."""

from dataclasses import dataclass, field

import numpy as np

from pantext.geometry import rect_iou_matrix

POSITIVE, NEGATIVE, IGNORE = 1, 0, -1

LEVELS = ("P2", "P3", "P4")


@dataclass(frozen=True)
class AnchorSpec:
    aspect_ratios: tuple = (0.2, 0.5, 1.0, 2.0, 4.0, 8.0)
    scales: dict = field(default_factory=lambda: {"P2": 32.0, "P3": 64.0, "P4": 128.0})
    strides: dict = field(default_factory=lambda: {"P2": 4, "P3": 8, "P4": 16})

    def __post_init__(self):
        if not self.aspect_ratios or any(r <= 0 for r in self.aspect_ratios):
            raise ValueError("aspect ratios must be positive")
        if set(self.scales) != set(self.strides):
            raise ValueError("scales and strides must cover the same levels")

    @property
    def num_anchors(self):
        return len(self.aspect_ratios)


@dataclass(frozen=True)
class MatchConfig:
    pos_iou: float = 0.7
    neg_iou: float = 0.3
    rpn_pos_per_batch: int = 128
    rpn_neg_per_batch: int = 128
    frcnn_pos_iou: float = 0.5
    frcnn_pos_per_batch: int = 64
    frcnn_neg_per_batch: int = 192
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.neg_iou <= self.pos_iou <= 1.0:
            raise ValueError("need 0 <= neg_iou <= pos_iou <= 1")


@dataclass
class MatchResult:
    labels: np.ndarray   # per box: POSITIVE / NEGATIVE / IGNORE
    matched: np.ndarray  # per box: argmax-IoU GT index, -1 when there are no GTs
    max_iou: np.ndarray

    @property
    def positives(self):
        return np.flatnonzero(self.labels == POSITIVE)

    @property
    def negatives(self):
        return np.flatnonzero(self.labels == NEGATIVE)


def generate_anchors(spec, level, fh, fw):
    """Anchors (fh*fw*R, 4) as x1, y1, x2, y2, row-major cells then ratio order."""
    if fh < 1 or fw < 1:
        raise ValueError(f"feature map size must be positive, got {fh}x{fw}")
    stride = spec.strides[level]
    scale = spec.scales[level]
    ratios = np.asarray(spec.aspect_ratios, dtype=np.float64)
    ws = scale * np.sqrt(ratios)
    hs = scale / np.sqrt(ratios)
    cy, cx = np.meshgrid((np.arange(fh) + 0.5) * stride, (np.arange(fw) + 0.5) * stride, indexing="ij")
    cx = cx.reshape(-1, 1)
    cy = cy.reshape(-1, 1)
    boxes = np.stack([cx - ws / 2, cy - hs / 2, cx + ws / 2, cy + hs / 2], axis=-1)
    return boxes.reshape(-1, 4)


def match_anchors(anchors, gts, cfg=MatchConfig()):
    """RPN labelling: positive if best anchor for some GT or IoU > pos_iou,
    negative if IoU < neg_iou with every GT, ignore otherwise."""
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    n = anchors.shape[0]
    if gts.shape[0] == 0:
        return MatchResult(np.full(n, NEGATIVE), np.full(n, -1), np.zeros(n))
    iou = rect_iou_matrix(anchors, gts)
    matched = np.argmax(iou, axis=1)  # first max = lowest GT index
    best = iou[np.arange(n), matched]
    labels = np.full(n, IGNORE)
    labels[best < cfg.neg_iou] = NEGATIVE
    labels[best > cfg.pos_iou] = POSITIVE
    # best anchor for each GT (zero-overlap GTs cannot claim an anchor)
    gt_best = iou.max(axis=0)
    for g in np.flatnonzero(gt_best > 0):
        labels[np.flatnonzero(iou[:, g] == gt_best[g])] = POSITIVE
    return MatchResult(labels, matched, best)


def match_proposals(props, gts, cfg=MatchConfig()):
    """Fast R-CNN labelling: positive iff IoU > frcnn_pos_iou with some GT."""
    props = np.asarray(props, dtype=np.float64).reshape(-1, 4)
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    n = props.shape[0]
    if gts.shape[0] == 0:
        return MatchResult(np.full(n, NEGATIVE), np.full(n, -1), np.zeros(n))
    iou = rect_iou_matrix(props, gts)
    matched = np.argmax(iou, axis=1)  # first max = lowest GT index
    best = iou[np.arange(n), matched]
    labels = np.where(best > cfg.frcnn_pos_iou, POSITIVE, NEGATIVE)
    return MatchResult(labels, matched, best)


@dataclass
class Sample:
    pos: np.ndarray
    neg: np.ndarray
    short: bool  # fewer candidates than n_pos + n_neg


def sample_minibatch(result, n_pos, n_neg, seed):
    """Seeded uniform sampling without replacement.

    A positive shortfall is made up with extra negatives so the batch keeps
    ``n_pos + n_neg`` entries when enough negatives exist. Returned indices
    are sorted ascending.
    """
    rng = np.random.default_rng(seed)
    pos = result.positives
    neg = result.negatives
    take_pos = min(n_pos, pos.size)
    take_neg = min(n_pos + n_neg - take_pos, neg.size)
    pos_sel = np.sort(rng.choice(pos, size=take_pos, replace=False)) if take_pos else pos[:0]
    neg_sel = np.sort(rng.choice(neg, size=take_neg, replace=False)) if take_neg else neg[:0]
    return Sample(pos_sel, neg_sel, take_pos + take_neg < n_pos + n_neg)
