# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``; same signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def im2col(x, int kh, int kw, int stride, int padding, int dilation):
    cdef const double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], w = xv.shape[3]
    cdef Py_ssize_t oh = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    out = np.empty((n, c * kh * kw, oh * ow), dtype=np.float64)
    cdef double[:, :, ::1] ov = out
    cdef Py_ssize_t b, ch, i, j, oy, ox, iy, ix, row
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ch * kh + i) * kw + j
                    for oy in range(oh):
                        iy = oy * stride - padding + i * dilation
                        if iy < 0 or iy >= h:
                            for ox in range(ow):
                                ov[b, row, oy * ow + ox] = 0.0
                            continue
                        for ox in range(ow):
                            ix = ox * stride - padding + j * dilation
                            if ix < 0 or ix >= w:
                                ov[b, row, oy * ow + ox] = 0.0
                            else:
                                ov[b, row, oy * ow + ox] = xv[b, ch, iy, ix]
    return out


cdef inline void _interp(double v, Py_ssize_t size, Py_ssize_t *lo, Py_ssize_t *hi, double *frac) nogil:
    if v < 0.0:
        v = 0.0
    if v > size - 1:
        v = size - 1
    lo[0] = <Py_ssize_t>floor(v)
    hi[0] = lo[0] + 1 if lo[0] + 1 < size else size - 1
    frac[0] = v - lo[0]


def roi_align(feat, boxes, int out_h, int out_w, int sampling):
    cdef const double[:, :, ::1] fv = np.ascontiguousarray(feat, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64)
    cdef Py_ssize_t c = fv.shape[0], h = fv.shape[1], w = fv.shape[2], n = bv.shape[0]
    out = np.zeros((n, c, out_h, out_w), dtype=np.float64)
    cdef double[:, :, :, ::1] ov = out
    cdef Py_ssize_t r, ch, ph, pw, sy, sx, y0, y1, x0, x1
    cdef double bin_h, bin_w, yy, xx, fy, fx, inv = 1.0 / (sampling * sampling)
    cdef double w00, w01, w10, w11
    for r in range(n):
        bin_h = (bv[r, 3] - bv[r, 1]) / out_h
        bin_w = (bv[r, 2] - bv[r, 0]) / out_w
        for ph in range(out_h):
            for pw in range(out_w):
                for sy in range(sampling):
                    yy = bv[r, 1] + ph * bin_h + (sy + 0.5) * (bin_h / sampling) - 0.5
                    _interp(yy, h, &y0, &y1, &fy)
                    for sx in range(sampling):
                        xx = bv[r, 0] + pw * bin_w + (sx + 0.5) * (bin_w / sampling) - 0.5
                        _interp(xx, w, &x0, &x1, &fx)
                        w00 = (1 - fy) * (1 - fx)
                        w01 = (1 - fy) * fx
                        w10 = fy * (1 - fx)
                        w11 = fy * fx
                        for ch in range(c):
                            ov[r, ch, ph, pw] += inv * (w00 * fv[ch, y0, x0] + w01 * fv[ch, y0, x1]
                                                        + w10 * fv[ch, y1, x0] + w11 * fv[ch, y1, x1])
    return out


cdef double _area(double *xs, double *ys, int n) nogil:
    cdef double s = 0.0
    cdef int k, m
    if n < 3:
        return 0.0
    for k in range(n):
        m = k + 1 if k + 1 < n else 0
        s += xs[k] * ys[m] - xs[m] * ys[k]
    return 0.5 * s


cdef double _clip_area(double *ax, double *ay, int na, double *bx, double *by, int nb) nogil:
    cdef double px_[16]
    cdef double py_[16]
    cdef double qx_[16]
    cdef double qy_[16]
    cdef double *inx = px_
    cdef double *iny = py_
    cdef double *outx = qx_
    cdef double *outy = qy_
    cdef double *tmp
    cdef int nin = na, nout, e, k
    cdef double ex, ey, x0, y0, px, py, pside, qx, qy, qside, t
    for k in range(na):
        inx[k] = ax[k]
        iny[k] = ay[k]
    for e in range(nb):
        if nin == 0:
            break
        x0 = bx[e]
        y0 = by[e]
        ex = bx[(e + 1) % nb] - x0
        ey = by[(e + 1) % nb] - y0
        nout = 0
        px = inx[nin - 1]
        py = iny[nin - 1]
        pside = ex * (py - y0) - ey * (px - x0)
        for k in range(nin):
            qx = inx[k]
            qy = iny[k]
            qside = ex * (qy - y0) - ey * (qx - x0)
            if qside >= 0:
                if pside < 0:
                    t = pside / (pside - qside)
                    outx[nout] = px + t * (qx - px)
                    outy[nout] = py + t * (qy - py)
                    nout += 1
                outx[nout] = qx
                outy[nout] = qy
                nout += 1
            elif pside >= 0:
                t = pside / (pside - qside)
                outx[nout] = px + t * (qx - px)
                outy[nout] = py + t * (qy - py)
                nout += 1
            px = qx
            py = qy
            pside = qside
        tmp = inx; inx = outx; outx = tmp
        tmp = iny; iny = outy; outy = tmp
        nin = nout
    return _area(inx, iny, nin)


cdef double _iou(double *ax, double *ay, double *bx, double *by) nogil:
    cdef double inter = _clip_area(ax, ay, 4, bx, by, 4)
    cdef double union = _area(ax, ay, 4) + _area(bx, by, 4) - inter
    cdef double r
    if union <= 0.0:
        return 0.0
    r = inter / union
    if r < 0.0:
        return 0.0
    if r > 1.0:
        return 1.0
    return r


def clip_convex(subject, clipper):
    cdef double[:, ::1] s = np.ascontiguousarray(subject, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(clipper, dtype=np.float64)
    return _clip_vertices(s, c)


cdef list _clip_vertices(double[:, ::1] s, double[:, ::1] c):
    cdef list out = [(s[k, 0], s[k, 1]) for k in range(s.shape[0])]
    cdef list inp
    cdef int m = c.shape[0], e
    cdef double ax, ay, ex, ey, px, py, pside, qx, qy, qside, t
    for e in range(m):
        if not out:
            break
        ax = c[e, 0]
        ay = c[e, 1]
        ex = c[(e + 1) % m, 0] - ax
        ey = c[(e + 1) % m, 1] - ay
        inp = out
        out = []
        px, py = inp[len(inp) - 1]
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
            px = qx
            py = qy
            pside = qside
    return out


def convex_iou(a, b):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double ax[4]
    cdef double ay[4]
    cdef double bx[4]
    cdef double by[4]
    cdef int k
    if av.shape[0] != 4 or bv.shape[0] != 4:
        from pantext._pykernels import convex_iou as slow
        return slow(a, b)
    for k in range(4):
        ax[k] = av[k, 0]; ay[k] = av[k, 1]
        bx[k] = bv[k, 0]; by[k] = bv[k, 1]
    return _iou(ax, ay, bx, by)


cdef inline bint _touch(double[:, :, ::1] qs, Py_ssize_t i, Py_ssize_t j) nogil:
    cdef double aminx = qs[i, 0, 0], amaxx = qs[i, 0, 0], aminy = qs[i, 0, 1], amaxy = qs[i, 0, 1]
    cdef double bminx = qs[j, 0, 0], bmaxx = qs[j, 0, 0], bminy = qs[j, 0, 1], bmaxy = qs[j, 0, 1]
    cdef int k
    for k in range(1, 4):
        aminx = min(aminx, qs[i, k, 0]); amaxx = max(amaxx, qs[i, k, 0])
        aminy = min(aminy, qs[i, k, 1]); amaxy = max(amaxy, qs[i, k, 1])
        bminx = min(bminx, qs[j, k, 0]); bmaxx = max(bmaxx, qs[j, k, 0])
        bminy = min(bminy, qs[j, k, 1]); bmaxy = max(bmaxy, qs[j, k, 1])
    return bminx <= amaxx and bmaxx >= aminx and bminy <= amaxy and bmaxy >= aminy


cdef double _iou_pair(double[:, :, ::1] qs, Py_ssize_t i, Py_ssize_t j) nogil:
    cdef double ax[4]
    cdef double ay[4]
    cdef double bx[4]
    cdef double by[4]
    cdef int k
    for k in range(4):
        ax[k] = qs[i, k, 0]; ay[k] = qs[i, k, 1]
        bx[k] = qs[j, k, 0]; by[k] = qs[j, k, 1]
    return _iou(ax, ay, bx, by)


def convex_iou_many(q, qs):
    allq = np.ascontiguousarray(np.concatenate([np.asarray(q, dtype=np.float64)[None], np.asarray(qs, dtype=np.float64).reshape(-1, 4, 2)]))
    cdef double[:, :, ::1] v = allq
    cdef Py_ssize_t m = v.shape[0] - 1, k
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] ov = out
    for k in range(m):
        if _touch(v, 0, k + 1):
            ov[k] = _iou_pair(v, 0, k + 1)
    return out


def nms_rects(boxes, double thresh):
    cdef const double[:, ::1] b = np.ascontiguousarray(boxes, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0], i, j, nk = 0
    alive = np.ones(n, dtype=np.uint8)
    keep = np.empty(n, dtype=np.intp)
    cdef unsigned char[::1] al = alive
    cdef Py_ssize_t[::1] kp = keep
    cdef double iw, ih, inter, union, ai
    for i in range(n):
        if not al[i]:
            continue
        kp[nk] = i
        nk += 1
        ai = (b[i, 2] - b[i, 0]) * (b[i, 3] - b[i, 1])
        for j in range(i + 1, n):
            if not al[j]:
                continue
            iw = min(b[i, 2], b[j, 2]) - max(b[i, 0], b[j, 0])
            ih = min(b[i, 3], b[j, 3]) - max(b[i, 1], b[j, 1])
            if iw <= 0 or ih <= 0:
                continue
            inter = iw * ih
            union = ai + (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1]) - inter
            if union > 0 and inter / union > thresh:
                al[j] = 0
    return keep[:nk].copy()


def nms_quads(quads, double thresh):
    cdef double[:, :, ::1] q = np.ascontiguousarray(quads, dtype=np.float64)
    cdef Py_ssize_t n = q.shape[0], i, j, nk = 0
    alive = np.ones(n, dtype=np.uint8)
    keep = np.empty(n, dtype=np.intp)
    cdef unsigned char[::1] al = alive
    cdef Py_ssize_t[::1] kp = keep
    for i in range(n):
        if not al[i]:
            continue
        kp[nk] = i
        nk += 1
        for j in range(i + 1, n):
            if al[j] and _touch(q, i, j) and _iou_pair(q, i, j) > thresh:
                al[j] = 0
    return keep[:nk].copy()
