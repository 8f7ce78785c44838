"""Pure-Python/numpy implementations of the hot kernels.

Signatures mirror ``_ckernels.pyx`` exactly. Inputs are assumed validated
by the callers in :mod:`pantext.tensor`, :mod:`pantext.roialign`,
:mod:`pantext.geometry` and :mod:`pantext.nms`.
"""

import numpy as np


def im2col(x, kh, kw, stride, padding, dilation):
    """Unfold ``x`` (N, C, H, W) into columns (N, C*kh*kw, OH*OW).

    Row index is ``(c*kh + i)*kw + j``, matching a C-ordered weight
    reshape ``(O, C, kh, kw) -> (O, C*kh*kw)``.
    """
    n, c, h, w = x.shape
    oh = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    ow = (w + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=np.float64)
    for i in range(kh):
        y0 = i * dilation
        for j in range(kw):
            x0 = j * dilation
            cols[:, :, i, j] = x[:, :, y0:y0 + stride * (oh - 1) + 1:stride,
                                 x0:x0 + stride * (ow - 1) + 1:stride]
    return cols.reshape(n, c * kh * kw, oh * ow)


def _sample_coords(lo, extent, bins, sampling):
    # bin-major sample positions in feature index space (half-pixel convention)
    size = extent / bins
    k = np.arange(bins * sampling)
    pos = lo[:, None] + (k // sampling)[None, :] * size[:, None] \
        + ((k % sampling) + 0.5)[None, :] * (size / sampling)[:, None]
    return pos - 0.5


def _interp_weights(v, size):
    v = np.clip(v, 0.0, size - 1)
    lo = np.floor(v).astype(np.intp)
    hi = np.minimum(lo + 1, size - 1)
    frac = v - lo
    return lo, hi, frac


def roi_align(feat, boxes, out_h, out_w, sampling):
    """Average-of-bilinear-samples pooling.

    ``feat`` is (C, H, W); ``boxes`` is (N, 4) as x1, y1, x2, y2 already in
    continuous feature coordinates. Returns (N, C, out_h, out_w).
    """
    c, h, w = feat.shape
    n = boxes.shape[0]
    if n == 0:
        return np.zeros((0, c, out_h, out_w))
    ys = _sample_coords(boxes[:, 1], boxes[:, 3] - boxes[:, 1], out_h, sampling)
    xs = _sample_coords(boxes[:, 0], boxes[:, 2] - boxes[:, 0], out_w, sampling)
    y0, y1, fy = _interp_weights(ys, h)
    x0, x1, fx = _interp_weights(xs, w)
    # gather (C, N, SY, SX) for the four neighbours
    r0 = feat[:, y0[:, :, None], x0[:, None, :]]
    r1 = feat[:, y0[:, :, None], x1[:, None, :]]
    r2 = feat[:, y1[:, :, None], x0[:, None, :]]
    r3 = feat[:, y1[:, :, None], x1[:, None, :]]
    wy = fy[:, :, None]
    wx = fx[:, None, :]
    vals = (1 - wy) * ((1 - wx) * r0 + wx * r1) + wy * ((1 - wx) * r2 + wx * r3)
    vals = vals.reshape(c, n, out_h, sampling, out_w, sampling).mean(axis=(3, 5))
    return np.ascontiguousarray(vals.transpose(1, 0, 2, 3))


def _shoelace(poly):
    if len(poly) < 3:
        return 0.0
    s = 0.0
    for k in range(len(poly)):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % len(poly)]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def clip_convex(subject, clipper):
    """Sutherland-Hodgman: clip polygon ``subject`` by the CCW convex ``clipper``.

    Both are sequences of (x, y). Returns a list of (x, y) tuples.
    """
    out = [(float(p[0]), float(p[1])) for p in subject]
    m = len(clipper)
    for e in range(m):
        if not out:
            break
        ax, ay = float(clipper[e][0]), float(clipper[e][1])
        bx, by = float(clipper[(e + 1) % m][0]), float(clipper[(e + 1) % m][1])
        ex, ey = bx - ax, by - ay
        inp = out
        out = []
        px, py = inp[-1]
        pside = ex * (py - ay) - ey * (px - ax)
        for qx, qy in inp:
            qside = ex * (qy - ay) - ey * (qx - ax)
            if qside >= 0:
                if pside < 0:
                    t = pside / (pside - qside)
                    out.append((px + t * (qx - px), py + t * (qy - py)))
                out.append((qx, qy))
            elif pside >= 0:
                t = pside / (pside - qside)
                out.append((px + t * (qx - px), py + t * (qy - py)))
            px, py, pside = qx, qy, qside
    return out


def convex_iou(a, b):
    """IoU of two CCW convex polygons given as (n, 2) arrays."""
    inter = _shoelace(clip_convex(a, b))
    union = _shoelace(a) + _shoelace(b) - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def convex_iou_many(q, qs):
    """IoU of CCW convex quad ``q`` (4, 2) against each of ``qs`` (M, 4, 2)."""
    out = np.zeros(len(qs))
    if len(qs) == 0:
        return out
    lo, hi = q.min(axis=0), q.max(axis=0)
    los, his = qs.min(axis=1), qs.max(axis=1)
    touch = np.all((los <= hi) & (his >= lo), axis=1)
    for k in np.flatnonzero(touch):
        out[k] = convex_iou(q, qs[k])
    return out


def nms_rects(boxes, thresh):
    """Greedy NMS over ``boxes`` (n, 4) already sorted by priority.

    Returns positions (into the sorted order) of kept boxes. Suppression
    is strictly ``iou > thresh``.
    """
    n = boxes.shape[0]
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    areas = (x2 - x1) * (y2 - y1)
    alive = np.ones(n, dtype=bool)
    keep = []
    for i in range(n):
        if not alive[i]:
            continue
        keep.append(i)
        rest = np.flatnonzero(alive[i + 1:]) + i + 1
        if rest.size == 0:
            continue
        iw = np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest])
        ih = np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest])
        inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
        union = areas[i] + areas[rest] - inter
        iou = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
        alive[rest[iou > thresh]] = False
    return np.asarray(keep, dtype=np.intp)


def nms_quads(quads, thresh):
    """Greedy NMS over CCW convex ``quads`` (n, 4, 2) already sorted by priority."""
    n = quads.shape[0]
    alive = np.ones(n, dtype=bool)
    keep = []
    for i in range(n):
        if not alive[i]:
            continue
        keep.append(i)
        rest = np.flatnonzero(alive[i + 1:]) + i + 1
        if rest.size == 0:
            continue
        iou = convex_iou_many(quads[i], quads[rest])
        alive[rest[iou > thresh]] = False
    return np.asarray(keep, dtype=np.intp)
