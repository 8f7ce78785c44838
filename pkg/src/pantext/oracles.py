"""Slow, independent reference implementations used to check the fast paths.

Nothing here calls into the kernels or the vectorised code it is meant to
verify.
"""

import numpy as np


def naive_conv2d(x, weight, bias, stride=1, padding=0, dilation=1):
    """Nested-loop cross-correlation."""
    x = np.asarray(x, dtype=np.float64)
    n, c, h, w = x.shape
    o, _, kh, kw = weight.shape
    oh = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    ow = (w + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    out = np.zeros((n, o, oh, ow))
    for b in range(n):
        for oc in range(o):
            for yy in range(oh):
                for xx in range(ow):
                    acc = bias[oc]
                    for ic in range(c):
                        for i in range(kh):
                            iy = yy * stride - padding + i * dilation
                            if iy < 0 or iy >= h:
                                continue
                            for j in range(kw):
                                ix = xx * stride - padding + j * dilation
                                if 0 <= ix < w:
                                    acc += weight[oc, ic, i, j] * x[b, ic, iy, ix]
                    out[b, oc, yy, xx] = acc
    return out


def bilinear_at(plane, y, x):
    """Scalar bilinear lookup at continuous index (y, x), clamped to the border."""
    h, w = plane.shape
    y = min(max(y, 0.0), h - 1)
    x = min(max(x, 0.0), w - 1)
    y0, x0 = int(np.floor(y)), int(np.floor(x))
    y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
    fy, fx = y - y0, x - x0
    return ((1 - fy) * (1 - fx) * plane[y0, x0] + (1 - fy) * fx * plane[y0, x1]
            + fy * (1 - fx) * plane[y1, x0] + fy * fx * plane[y1, x1])


def roi_sample_points(roi, scale, out_size=(7, 7), sampling=2):
    """Per-bin sample coordinates (feature index space) for an image-space roi.

    Returns ys (out_h, sampling) and xs (out_w, sampling).
    """
    x1, y1, x2, y2 = (v * scale for v in roi)
    oh, ow = out_size
    bh, bw = (y2 - y1) / oh, (x2 - x1) / ow
    ys = np.array([[y1 + p * bh + (s + 0.5) * bh / sampling - 0.5 for s in range(sampling)] for p in range(oh)])
    xs = np.array([[x1 + p * bw + (s + 0.5) * bw / sampling - 0.5 for s in range(sampling)] for p in range(ow)])
    return ys, xs


def brute_rect_iou(a, b):
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def brute_greedy_nms(items, scores, iou_fn, thresh):
    """Full pairwise IoU matrix, then greedy selection by (score desc, index asc).

    ``iou_fn`` must be symmetric; each unordered pair is evaluated once.
    """
    n = len(items)
    iou = [[1.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            iou[i][j] = iou[j][i] = iou_fn(items[i], items[j])
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    removed = [False] * n
    keep = []
    for i in order:
        if removed[i]:
            continue
        keep.append(i)
        for j in order:
            if j != i and not removed[j] and iou[i][j] > thresh:
                removed[j] = True
    return keep


def _inside_convex(px, py, poly):
    sign = np.sign(_signed(poly))
    ok = np.ones(px.shape, dtype=bool)
    for k in range(len(poly)):
        ax, ay = poly[k]
        bx, by = poly[(k + 1) % len(poly)]
        ok &= sign * ((bx - ax) * (py - ay) - (by - ay) * (px - ax)) >= 0
    return ok


def _signed(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def monte_carlo_iou(a, b, samples=1_000_000, seed=0):
    """IoU by point sampling over the joint bounding box.

    Points are stratified (one jittered sample per cell of a square grid),
    which keeps the estimator unbiased with far lower variance than iid.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    pts = np.vstack([a, b])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    side = int(np.sqrt(samples))
    rng = np.random.default_rng(seed)
    gy, gx = np.mgrid[0:side, 0:side]
    u = (gx + rng.random((side, side))) / side
    v = (gy + rng.random((side, side))) / side
    px = lo[0] + u * (hi[0] - lo[0])
    py = lo[1] + v * (hi[1] - lo[1])
    ina = _inside_convex(px, py, a)
    inb = _inside_convex(px, py, b)
    union = np.count_nonzero(ina | inb)
    return np.count_nonzero(ina & inb) / union if union else 0.0


def fan_area(poly):
    """Polygon area as a sum of triangles fanned from vertex 0 (convex input)."""
    poly = np.asarray(poly, dtype=np.float64)
    total = 0.0
    for k in range(1, len(poly) - 1):
        (x0, y0), (x1, y1), (x2, y2) = poly[0], poly[k], poly[k + 1]
        total += 0.5 * abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
    return total


def central_difference(f, x, step=1e-6):
    """Numerical gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        up = f(x)
        flat[i] = old - step
        down = f(x)
        flat[i] = old
        gf[i] = (up - down) / (2 * step)
    return g


def random_convex_quad(rng, center=(0.0, 0.0), radius=(5.0, 5.0)):
    """Four points on a random rotated ellipse at sorted angles (always convex)."""
    gaps = rng.uniform(0.3, 1.0, size=4)
    ang = np.cumsum(gaps / gaps.sum() * 2 * np.pi) + rng.uniform(0, 2 * np.pi)
    rx = rng.uniform(0.5, 1.0) * radius[0]
    ry = rng.uniform(0.5, 1.0) * radius[1]
    rot = rng.uniform(0, np.pi)
    px, py = rx * np.cos(ang), ry * np.sin(ang)
    c, s = np.cos(rot), np.sin(rot)
    return np.stack([center[0] + c * px - s * py, center[1] + s * px + c * py], axis=1)
