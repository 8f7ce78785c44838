"""Quadrilateral and rectangle arithmetic.

A quad is a (4, 2) float array of vertices ordered top-left, top-right,
bottom-right, bottom-left in image coordinates (y grows downward). The
8-value quad delta references vertex *i* to corner *i* of the proposal
rectangle:

    vertex 1 -> (x1, y1)    vertex 2 -> (x2, y1)
    vertex 3 -> (x2, y2)    vertex 4 -> (x1, y2)

with x-offsets divided by the proposal width and y-offsets by its height.
"""

from typing import NamedTuple

import numpy as np

from pantext._backend import kernels
from pantext.errors import GeometryError


class AxisRect(NamedTuple):
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def area(self):
        return self.width * self.height

    def corners(self):
        """The rect as a quad, corners in delta-reference order."""
        return np.array([[self.x1, self.y1], [self.x2, self.y1],
                         [self.x2, self.y2], [self.x1, self.y2]], dtype=np.float64)

    def validate(self):
        if not (np.isfinite(self).all() and self.x2 > self.x1 and self.y2 > self.y1):
            raise GeometryError(f"degenerate rectangle {tuple(self)}")
        return self


def as_quad(q):
    arr = np.asarray(q, dtype=np.float64).reshape(-1, 2)
    if arr.shape != (4, 2):
        raise GeometryError(f"a quad needs exactly 4 vertices, got {arr.shape[0]}")
    return arr


def _rect_arrays(p):
    p = np.asarray(p, dtype=np.float64)
    w = p[..., 2] - p[..., 0]
    h = p[..., 3] - p[..., 1]
    if np.any(~(w > 0)) or np.any(~(h > 0)):
        raise GeometryError("proposal rectangle must have positive width and height")
    return p, w, h


# column of the rect (x1, y1, x2, y2) each quad coordinate is referenced to
_REF_X = np.array([0, 2, 2, 0])
_REF_Y = np.array([1, 1, 3, 3])


def quad_encode(g, p):
    """Eight normalised vertex offsets of quad ``g`` from rect ``p``.

    Vectorised: ``g`` may be (..., 4, 2) and ``p`` (..., 4).
    """
    g = np.asarray(g, dtype=np.float64)
    p, w, h = _rect_arrays(p)
    dx = (g[..., 0] - p[..., _REF_X]) / w[..., None]
    dy = (g[..., 1] - p[..., _REF_Y]) / h[..., None]
    return np.stack([dx, dy], axis=-1).reshape(*g.shape[:-2], 8)


def quad_decode(d, p):
    """Inverse of :func:`quad_encode`; returns (..., 4, 2)."""
    d = np.asarray(d, dtype=np.float64).reshape(*np.shape(d)[:-1], 4, 2)
    p, w, h = _rect_arrays(p)
    x = p[..., _REF_X] + d[..., 0] * w[..., None]
    y = p[..., _REF_Y] + d[..., 1] * h[..., None]
    return np.stack([x, y], axis=-1)


def rect_encode(g, p):
    """Center/size deltas (dx, dy, dw, dh) of rect ``g`` relative to ``p``."""
    g, gw, gh = _rect_arrays(g)
    p, pw, ph = _rect_arrays(p)
    dx = ((g[..., 0] + g[..., 2]) - (p[..., 0] + p[..., 2])) * 0.5 / pw
    dy = ((g[..., 1] + g[..., 3]) - (p[..., 1] + p[..., 3])) * 0.5 / ph
    return np.stack([dx, dy, np.log(gw / pw), np.log(gh / ph)], axis=-1)


def rect_decode(d, p, max_log_scale=None):
    """Inverse of :func:`rect_encode`.

    ``max_log_scale`` clamps dw/dh before exponentiation (inference only).
    """
    d = np.asarray(d, dtype=np.float64)
    p, pw, ph = _rect_arrays(p)
    dw, dh = d[..., 2], d[..., 3]
    if max_log_scale is not None:
        dw = np.minimum(dw, max_log_scale)
        dh = np.minimum(dh, max_log_scale)
    cx = (p[..., 0] + p[..., 2]) * 0.5 + d[..., 0] * pw
    cy = (p[..., 1] + p[..., 3]) * 0.5 + d[..., 1] * ph
    w = pw * np.exp(dw)
    h = ph * np.exp(dh)
    return np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=-1)


def rect_iou(a, b):
    ax1, ay1, ax2, ay2 = (float(v) for v in a)
    bx1, by1, bx2, by2 = (float(v) for v in b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union if union > 0 else 0.0


def rect_iou_matrix(a, b):
    """Pairwise IoU between rect arrays (n, 4) and (m, 4)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    safe = np.where(union > 0, union, 1.0)
    return np.where(union > 0, inter / safe, 0.0)


def _succ(a):
    # cyclic successor along the first axis; np.roll is slow for tiny arrays
    return np.concatenate((a[1:], a[:1]))


def signed_area(poly):
    """Shoelace area; positive for counter-clockwise in x-right/y-up axes."""
    poly = np.asarray(poly, dtype=np.float64)
    nxt = _succ(poly)
    return 0.5 * float(np.dot(poly[:, 0], nxt[:, 1]) - np.dot(nxt[:, 0], poly[:, 1]))


def polygon_area(poly):
    return abs(signed_area(poly))


def quad_to_bounding_rect(q):
    q = np.asarray(q, dtype=np.float64).reshape(-1, 2)
    lo, hi = q.min(axis=0), q.max(axis=0)
    return AxisRect(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def is_convex(poly):
    poly = np.asarray(poly, dtype=np.float64)
    if signed_area(poly) == 0.0:
        return False
    e = _succ(poly) - poly
    en = _succ(e)
    cross = e[:, 0] * en[:, 1] - e[:, 1] * en[:, 0]
    return bool(np.all(cross >= 0) or np.all(cross <= 0))


def canonical_convex(q):
    """Validate convexity and return the quad with positive signed area.

    Raises :class:`GeometryError` for zero-area or non-convex input.
    """
    q = as_quad(q)
    if not np.isfinite(q).all():
        raise GeometryError("quad has non-finite coordinates")
    if not is_convex(q):
        raise GeometryError(f"quad is non-convex or has zero area: {q.tolist()}")
    if signed_area(q) < 0:
        q = q[::-1]
    return np.ascontiguousarray(q)


def quad_iou(a, b):
    """Polygon IoU of two convex quads by Sutherland-Hodgman clipping."""
    a = canonical_convex(a)
    b = canonical_convex(b)
    # fixed argument order makes the result exactly symmetric
    if tuple(a.ravel()) > tuple(b.ravel()):
        a, b = b, a
    return float(kernels().convex_iou(a, b))


def clip_polygon(subject, clipper):
    """Clip ``subject`` by the convex polygon ``clipper``; returns (k, 2)."""
    clipper = np.asarray(clipper, dtype=np.float64)
    if signed_area(clipper) < 0:
        clipper = clipper[::-1]
    out = kernels().clip_convex(np.asarray(subject, dtype=np.float64), np.ascontiguousarray(clipper))
    return np.asarray(out, dtype=np.float64).reshape(-1, 2)


def points_in_polygon(points, poly, eps=1e-9):
    """Boolean mask of ``points`` (n, 2) inside ``poly`` (boundary counts as inside).

    Crossing-number test plus an explicit on-edge check, so it also works
    for non-convex simple polygons.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    poly = np.asarray(poly, dtype=np.float64)
    px, py = pts[:, 0:1], pts[:, 1:2]
    ax, ay = poly[:, 0][None, :], poly[:, 1][None, :]
    bx, by = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = ax + (py - ay) * (bx - ax) / (by - ay)
    inside = (np.count_nonzero(straddle & (px < xcross), axis=1) % 2) == 1
    ex, ey = bx - ax, by - ay
    cross = ex * (py - ay) - ey * (px - ax)
    seg_len = np.hypot(ex, ey)
    dot = (px - ax) * ex + (py - ay) * ey
    on_edge = (np.abs(cross) <= eps * np.maximum(seg_len, 1.0)) & (dot >= -eps) & (dot <= seg_len ** 2 + eps)
    return inside | on_edge.any(axis=1)


def convex_hull(points):
    """Andrew's monotone chain; returns hull vertices counter-clockwise (y-up)."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=np.float64).reshape(-1, 2))))
    if len(pts) <= 2:
        return np.asarray(pts, dtype=np.float64)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=np.float64)


def min_area_quad(points):
    """Minimum-area enclosing rectangle of a point set, as a quad.

    Used to compare curved (14-point) ground truth against predicted quads.
    """
    hull = convex_hull(points)
    if len(hull) < 3:
        raise GeometryError("polygon is degenerate (fewer than 3 distinct hull points)")
    best = None
    for k in range(len(hull)):
        e = hull[(k + 1) % len(hull)] - hull[k]
        n = np.hypot(*e)
        if n == 0:
            continue
        u = e / n
        v = np.array([-u[1], u[0]])
        pu, pv = hull @ u, hull @ v
        area = (pu.max() - pu.min()) * (pv.max() - pv.min())
        if best is None or area < best[0]:
            best = (area, u, v, pu.min(), pu.max(), pv.min(), pv.max())
    _, u, v, u0, u1, v0, v1 = best
    quad = np.array([u0 * u + v0 * v, u1 * u + v0 * v, u1 * u + v1 * v, u0 * u + v1 * v])
    return order_quad(quad)


def order_quad(q):
    """Reorder a convex quad to top-left, top-right, bottom-right, bottom-left."""
    q = as_quad(q)
    c = q.mean(axis=0)
    # clockwise on screen (y down) = increasing atan2 angle
    ang = np.arctan2(q[:, 1] - c[1], q[:, 0] - c[0])
    q = q[np.argsort(ang, kind="stable")]
    start = int(np.argmin(q[:, 0] + q[:, 1]))
    return np.roll(q, -start, axis=0)
