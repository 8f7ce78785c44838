"""Single-image inference.

Stages: base CNN -> PAN pyramid -> three RPNs -> rect decode and clip ->
NMS -> top-N -> Skip-RoIAlign -> head -> quad decode -> score cut ->
Skewed NMS -> mask head on the survivors' bounding boxes.
"""

import functools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from pantext.anchors import AnchorSpec, generate_anchors
from pantext.errors import GeometryError, PanTextError, PipelineError
from pantext.geometry import canonical_convex, quad_decode, rect_decode
from pantext.network import forward_features, head_forward_batch, head_trunk, mask_branch, rpn_level_outputs
from pantext.nms import nms_quad_arrays, nms_rect_arrays, priority_order
from pantext.pipeline.config import PipelineConfig
from pantext.roialign import skip_roi_align_batch
from pantext.tensor import sigmoid
from pantext.weights import LEVELS

log = logging.getLogger(__name__)

SCHEMA = "pantext.detections/1"
MAX_LOG_SCALE = math.log(1000.0 / 16)


@dataclass
class Detection:
    quad: np.ndarray              # (4, 2), original image coordinates
    score: float
    mask: np.ndarray = None       # (M, M) probabilities
    mask_rect: tuple = None       # (x1, y1, x2, y2) the mask grid spans, original coordinates

    def binary_mask(self, threshold=0.5):
        return None if self.mask is None else (self.mask > threshold)

    def to_json(self):
        d = {"quad": [[float(x), float(y)] for x, y in self.quad], "score": float(self.score)}
        if self.mask is not None:
            d["mask"] = {"proposal": [float(v) for v in self.mask_rect],
                         "grid": [[float(v) for v in row] for row in self.mask]}
        return d

    @classmethod
    def from_json(cls, d):
        mask = d.get("mask")
        return cls(np.asarray(d["quad"], dtype=np.float64).reshape(4, 2), float(d["score"]),
                   None if mask is None else np.asarray(mask["grid"], dtype=np.float64),
                   None if mask is None else tuple(mask["proposal"]))


@dataclass
class InferenceTrace:
    """Intermediate counts, for checking the pipeline's contracts."""

    num_anchors: int = 0
    num_proposals: int = 0  # entering the second stage
    num_scored: int = 0     # above the score threshold
    num_rejected: int = 0   # non-convex / degenerate decoded quads
    num_kept: int = 0


def _stage(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            try:
                return fn(*a, **kw)
            except PipelineError:
                raise
            except (PanTextError, ValueError) as exc:
                raise PipelineError(name, exc) from exc
        return run
    return wrap


@_stage("proposals")
def propose(rpn, image_size, weights, cfg, spec=AnchorSpec()):
    """Decode all RPN outputs, NMS, top-N. Returns (boxes (P, 4), scores (P,), n_anchors)."""
    h, w = image_size
    k = weights.config.num_anchors
    boxes, scores = [], []
    for lv in LEVELS:
        logits, deltas = rpn[lv]
        anchors = generate_anchors(spec, lv, logits.shape[2], logits.shape[3])
        lg, dl = rpn_level_outputs(logits, deltas, k)
        z = lg - lg.max(axis=1, keepdims=True)
        prob = np.exp(z[:, 1]) / np.exp(z).sum(axis=1)
        b = rect_decode(dl, anchors, max_log_scale=MAX_LOG_SCALE)
        b[:, 0::2] = np.clip(b[:, 0::2], 0.0, w)
        b[:, 1::2] = np.clip(b[:, 1::2], 0.0, h)
        boxes.append(b)
        scores.append(prob)
    boxes = np.concatenate(boxes)
    scores = np.concatenate(scores)
    n_anchors = boxes.shape[0]
    ids = np.arange(n_anchors)
    valid = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
    boxes, scores, ids = boxes[valid], scores[valid], ids[valid]
    if cfg.pre_nms_top_n:
        order = priority_order(scores, ids)[:cfg.pre_nms_top_n]
        boxes, scores, ids = boxes[order], scores[order], ids[order]
    keep = nms_rect_arrays(boxes, scores, cfg.rpn_nms_iou, ids)[:cfg.top_n]
    return boxes[keep], scores[keep], n_anchors


def _chunks(n, size):
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def _map_chunks(fn, n, cfg):
    spans = _chunks(n, cfg.chunk_size)
    if cfg.threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            return list(pool.map(fn, spans))
    return [fn(s) for s in spans]


@_stage("detection-head")
def classify(pyr, proposals, weights, cfg):
    """Head on every proposal in fixed-size chunks; returns (text prob (P,), quads (P, 4, 2))."""
    if len(proposals) == 0:
        return np.zeros(0), np.zeros((0, 4, 2))

    def run(span):
        rois = proposals[span[0]:span[1]]
        feats = skip_roi_align_batch(pyr, rois, weights["roi.reduce"])
        return head_forward_batch(feats, weights, with_mask=False)

    outs = _map_chunks(run, len(proposals), cfg)
    logits = np.concatenate([o.logits for o in outs])
    deltas = np.concatenate([o.quad_delta for o in outs])
    z = logits - logits.max(axis=1, keepdims=True)
    prob = np.exp(z[:, 1]) / np.exp(z).sum(axis=1)
    return prob, quad_decode(deltas, proposals)


@_stage("mask-head")
def predict_masks(pyr, rects, weights, cfg):
    if len(rects) == 0:
        return np.zeros((0, weights.config.mask_size, weights.config.mask_size))

    def run(span):
        feats = skip_roi_align_batch(pyr, rects[span[0]:span[1]], weights["roi.reduce"])
        return mask_branch(head_trunk(feats, weights), weights)

    logits = np.concatenate(_map_chunks(run, len(rects), cfg))
    return sigmoid(logits[:, 0])


def infer(image, weights, cfg=PipelineConfig(), trace=None):
    """Detections for one prepared image (:class:`~pantext.pipeline.image.ImageInput`).

    Detections come back in Skewed-NMS keep order (score desc, proposal id asc).
    """
    trace = trace if trace is not None else InferenceTrace()
    try:
        pyr, rpn = forward_features(image.tensor, weights)
    except PanTextError as exc:
        raise PipelineError("backbone", exc) from exc
    rh, rw = image.resized_size
    oh, ow = image.orig_size
    sy, sx = image.scale

    proposals, _, n_anchors = propose(rpn, (rh, rw), weights, cfg)
    trace.num_anchors = n_anchors
    trace.num_proposals = len(proposals)

    prob, quads = classify(pyr, proposals, weights, cfg)
    sel = np.flatnonzero(prob > cfg.score_threshold)
    trace.num_scored = sel.size

    # final geometry lives in original image coordinates
    cand_quads, cand_scores, cand_ids = [], [], []
    for i in sel:
        q = quads[i] / np.array([sx, sy])
        q[:, 0] = np.clip(q[:, 0], 0.0, ow)
        q[:, 1] = np.clip(q[:, 1], 0.0, oh)
        try:
            canonical_convex(q)
        except GeometryError:
            trace.num_rejected += 1
            continue
        cand_quads.append(q)
        cand_scores.append(prob[i])
        cand_ids.append(i)
    if trace.num_rejected:
        log.info("dropped %d non-convex or degenerate quads", trace.num_rejected)
    if not cand_quads:
        return []
    cand_quads = np.stack(cand_quads)
    cand_scores = np.asarray(cand_scores)
    try:
        keep = nms_quad_arrays(cand_quads, cand_scores, cfg.skewed_nms_iou, np.asarray(cand_ids))
    except PanTextError as exc:
        raise PipelineError("skewed-nms", exc) from exc
    trace.num_kept = keep.size

    kept = cand_quads[keep]
    rects_orig = np.concatenate([kept.min(axis=1), kept.max(axis=1)], axis=1)
    rects_resized = rects_orig * np.array([sx, sy, sx, sy])
    masks = predict_masks(pyr, rects_resized, weights, cfg)
    return [Detection(kept[j], float(cand_scores[keep[j]]), masks[j], tuple(float(v) for v in rects_orig[j]))
            for j in range(keep.size)]


def detections_to_json(image_key, image, dets):
    doc = {
        "schema": SCHEMA,
        "image": image_key,
        "image_size": [int(image.orig_size[1]), int(image.orig_size[0])],
        "detections": [d.to_json() for d in dets],
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def detections_from_json(text):
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA:
        raise PanTextError(f"unsupported detection schema {doc.get('schema')!r}")
    return doc["image"], [Detection.from_json(d) for d in doc["detections"]]
