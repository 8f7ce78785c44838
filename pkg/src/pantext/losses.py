"""Training losses and targets, with analytic gradients w.r.t. network outputs.

Normalisation follows Faster R-CNN: classification terms average over the
sampled mini-batch, regression terms sum over positives and divide by the
positive count. Empty positive sets contribute exactly zero.
"""

from dataclasses import dataclass, field

import numpy as np

from pantext.anchors import MatchConfig, match_anchors, match_proposals, sample_minibatch
from pantext.errors import ShapeError
from pantext.geometry import as_quad, points_in_polygon, quad_encode, rect_encode


@dataclass(frozen=True)
class LossConfig:
    lambda_loc_rpn: float = 3.0
    lambda_loc_frcnn: float = 1.0
    lambda_mask: float = 0.03125

    def __post_init__(self):
        if min(self.lambda_loc_rpn, self.lambda_loc_frcnn, self.lambda_mask) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossReport:
    l_rpn: float
    l_frcnn: float
    l_mask: float
    l_total: float
    terms: dict = field(default_factory=dict)


def _log_softmax(z):
    z = np.asarray(z, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    # log1p over the non-max terms keeps tiny losses accurate to full precision
    top = np.argmax(z, axis=-1)[..., None]
    np.put_along_axis(e, top, 0.0, axis=-1)
    return z - m - np.log1p(e.sum(axis=-1, keepdims=True))


def softmax_ce(logits, label):
    """Cross-entropy of one logit vector; returns (loss, d loss / d logits)."""
    logits = np.asarray(logits, dtype=np.float64)
    logp = _log_softmax(logits)
    grad = np.exp(logp)
    grad[label] -= 1.0
    return float(-logp[label]), grad


def softmax_ce_batch(logits, labels):
    """Mean cross-entropy over rows of ``logits`` (S, K); gradient has the same shape."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    s = labels.size
    if s == 0:
        return 0.0, np.zeros_like(logits)
    logits = logits.reshape(s, -1)
    logp = _log_softmax(logits)
    rows = np.arange(s)
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    return float(-logp[rows, labels].sum() / s), grad / s


def smooth_l1(pred, target):
    """Summed smooth-L1 (beta 1); returns (loss, d loss / d pred)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"smooth_l1: pred {pred.shape} vs target {target.shape}", dim="length")
    x = pred - target
    ax = np.abs(x)
    small = ax < 1.0
    loss = np.where(small, 0.5 * x * x, ax - 0.5).sum()
    grad = np.where(small, x, np.sign(x))
    return float(loss), grad


def binary_ce(mask_logits, target):
    """Pixel-mean sigmoid cross-entropy, stabilised; returns (loss, grad)."""
    z = np.asarray(mask_logits, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if z.shape != t.shape:
        raise ShapeError(f"binary_ce: logits {z.shape} vs target {t.shape}", dim="mask")
    n = z.size
    # -[t log s(z) + (1-t) log(1-s(z))] = max(z,0) - z t + log(1 + exp(-|z|))
    loss = (np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))).sum() / n
    ez = np.exp(-np.abs(z))
    sig = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return float(loss), (sig - t) / n


def multitask_loss(cls_logits, labels, loc_pred, loc_target, lam):
    """L_cls + lam * L_loc for one sampled batch.

    ``labels`` are 1 (positive) / 0 (negative); ``loc_pred`` and
    ``loc_target`` are rows for every sampled entry, only positive rows
    contribute. Returns (loss, parts, grad_logits, grad_loc).
    """
    labels = np.asarray(labels, dtype=np.intp)
    loc_pred = np.asarray(loc_pred, dtype=np.float64)
    loc_target = np.asarray(loc_target, dtype=np.float64)
    l_cls, g_cls = softmax_ce_batch(cls_logits, labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    g_loc = np.zeros_like(loc_pred)
    l_loc = 0.0
    if n_pos:
        l_sum, g = smooth_l1(loc_pred[pos], loc_target[pos])
        l_loc = l_sum / n_pos
        g_loc[pos] = lam * g / n_pos
    return l_cls + lam * l_loc, {"cls": l_cls, "loc": l_loc}, g_cls, g_loc


@dataclass
class StageBatch:
    """Sampled predictions and targets for one RPN level or the Fast R-CNN stage."""

    cls_logits: np.ndarray  # (S, 2)
    labels: np.ndarray      # (S,) 1 / 0
    loc_pred: np.ndarray    # (S, 4) rect deltas or (S, 8) quad deltas
    loc_target: np.ndarray


def rpn_loss(levels, cfg=LossConfig()):
    """Sum of the per-RPN multi-task losses. ``levels`` maps level -> StageBatch.

    Returns (total, per-level parts, per-level (grad_logits, grad_loc)).
    """
    total, parts, grads = 0.0, {}, {}
    for name, b in levels.items():
        loss, p, g_cls, g_loc = multitask_loss(b.cls_logits, b.labels, b.loc_pred, b.loc_target, cfg.lambda_loc_rpn)
        total += loss
        parts[name] = dict(p, total=loss)
        grads[name] = (g_cls, g_loc)
    return total, parts, grads


def frcnn_loss(batch, cfg=LossConfig()):
    """Fast R-CNN multi-task loss with 8-value quad deltas."""
    loss, parts, g_cls, g_loc = multitask_loss(batch.cls_logits, batch.labels, batch.loc_pred,
                                               batch.loc_target, cfg.lambda_loc_frcnn)
    return loss, dict(parts, total=loss), (g_cls, g_loc)


def mask_loss(mask_logits, targets):
    """Mean binary cross-entropy over positive proposals; zero when there are none."""
    if len(targets) == 0:
        return 0.0, []
    losses, grads = zip(*(binary_ce(z, t) for z, t in zip(mask_logits, targets)))
    n = len(targets)
    return float(sum(losses) / n), [g / n for g in grads]


def total_loss(l_rpn, l_frcnn, l_mask, cfg=LossConfig()):
    total = l_rpn + l_frcnn + cfg.lambda_mask * l_mask
    return LossReport(l_rpn, l_frcnn, l_mask, total,
                      {"rpn": l_rpn, "frcnn": l_frcnn, "mask": l_mask, "mask_weighted": cfg.lambda_mask * l_mask})


def make_mask_target(proposal, gt_quad, m=14):
    """Rasterise ``gt_quad`` intersected with ``proposal`` onto an m x m grid.

    A cell is 1 when its centre lies in both the proposal and the quad
    (boundary inclusive).
    """
    x1, y1, x2, y2 = (float(v) for v in proposal)
    if not (x2 > x1 and y2 > y1):
        raise ShapeError(f"degenerate proposal {proposal}", dim="proposal")
    cx = x1 + (np.arange(m) + 0.5) * (x2 - x1) / m
    cy = y1 + (np.arange(m) + 0.5) * (y2 - y1) / m
    gx, gy = np.meshgrid(cx, cy)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = points_in_polygon(pts, as_quad(gt_quad))
    return inside.reshape(m, m).astype(np.uint8)


def rpn_targets(anchors, gt_rects, cfg=MatchConfig(), seed=None):
    """Sample an RPN batch: returns (indices, labels, rect-delta targets)."""
    res = match_anchors(anchors, gt_rects, cfg)
    s = sample_minibatch(res, cfg.rpn_pos_per_batch, cfg.rpn_neg_per_batch, cfg.seed if seed is None else seed)
    idx = np.concatenate([s.pos, s.neg])
    labels = np.concatenate([np.ones(s.pos.size, np.intp), np.zeros(s.neg.size, np.intp)])
    targets = np.zeros((idx.size, 4))
    if s.pos.size:
        gts = np.asarray(gt_rects, dtype=np.float64).reshape(-1, 4)
        targets[:s.pos.size] = rect_encode(gts[res.matched[s.pos]], np.asarray(anchors)[s.pos])
    return idx, labels, targets


def frcnn_targets(proposals, gt_quads, cfg=MatchConfig(), seed=None, mask_size=14):
    """Sample a Fast R-CNN batch against quad ground truth.

    Matching uses the quads' axis-aligned bounding boxes. Returns
    (indices, labels, quad-delta targets, mask targets for the positives).
    """
    proposals = np.asarray(proposals, dtype=np.float64).reshape(-1, 4)
    gt_quads = np.asarray(gt_quads, dtype=np.float64).reshape(-1, 4, 2)
    gt_rects = np.concatenate([gt_quads.min(axis=1), gt_quads.max(axis=1)], axis=1)
    res = match_proposals(proposals, gt_rects, cfg)
    s = sample_minibatch(res, cfg.frcnn_pos_per_batch, cfg.frcnn_neg_per_batch, cfg.seed if seed is None else seed)
    idx = np.concatenate([s.pos, s.neg])
    labels = np.concatenate([np.ones(s.pos.size, np.intp), np.zeros(s.neg.size, np.intp)])
    targets = np.zeros((idx.size, 8))
    masks = []
    if s.pos.size:
        matched = gt_quads[res.matched[s.pos]]
        targets[:s.pos.size] = quad_encode(matched, proposals[s.pos])
        masks = [make_mask_target(proposals[i], q, mask_size) for i, q in zip(s.pos, matched)]
    return idx, labels, targets, masks
