"""Oracle suites behind the ``selftest`` and ``gradcheck`` commands.

Each check raises ``AssertionError`` on failure and otherwise returns a
short detail string. :func:`run_checks` times them and collects results.
"""

import time
from dataclasses import dataclass

import numpy as np

from pantext import oracles
from pantext._backend import available_backends, backend_name, set_backend
from pantext.anchors import AnchorSpec, generate_anchors
from pantext.geometry import (AxisRect, canonical_convex, quad_decode, quad_encode, quad_iou, rect_decode, rect_encode, rect_iou)
from pantext.losses import LossConfig, StageBatch, binary_ce, rpn_loss, smooth_l1, softmax_ce, total_loss
from pantext.network import build_pyramid, fpa, gau, stub_base
from pantext.nms import nms_quad_arrays, nms_rect_arrays
from pantext.pipeline.evaluate import evaluate
from pantext.pipeline.gt import GtItem
from pantext.roialign import RoiSpec, roi_align
from pantext.tensor import ConvParams, bilinear_upsample, conv2d
from pantext.weights import NetConfig, init_weights

FD_STEP = 1e-6
GRAD_RTOL = 1e-5


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _rel_err(a, n):
    a = np.asarray(a).ravel()
    n = np.asarray(n).ravel()
    scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), 1e-8)
    return float(np.abs(a - n).max(initial=0.0) / scale)


# -- gradients ---------------------------------------------------------------

def grad_softmax_ce(rng, cases=1000):
    worst = 0.0
    for _ in range(cases):
        z = rng.normal(0, 3, size=2)
        label = int(rng.integers(2))
        _, g = softmax_ce(z, label)
        num = oracles.central_difference(lambda v: softmax_ce(v, label)[0], z, FD_STEP)
        worst = max(worst, _rel_err(g, num))
    assert worst < GRAD_RTOL, f"max relative error {worst:.3g}"
    return f"{cases} cases, max rel err {worst:.2e}"


def grad_smooth_l1(rng, cases=1000):
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 9))
        target = rng.normal(0, 1, size=n)
        x = rng.normal(0, 1.5, size=n)
        # keep finite differences off the |x| = 1 kink
        x = np.where(np.abs(np.abs(x) - 1.0) < 1e-3, x * 1.01, x)
        pred = target + x
        _, g = smooth_l1(pred, target)
        num = oracles.central_difference(lambda v: smooth_l1(v, target)[0], pred, FD_STEP)
        worst = max(worst, _rel_err(g, num))
    assert worst < GRAD_RTOL, f"max relative error {worst:.3g}"
    return f"{cases} cases, max rel err {worst:.2e}"


def grad_binary_ce(rng, cases=1000, size=8):
    worst = 0.0
    for _ in range(cases):
        z = rng.normal(0, 3, size=(size, size))
        t = (rng.random((size, size)) < 0.5).astype(np.float64)
        _, g = binary_ce(z, t)
        num = oracles.central_difference(lambda v: binary_ce(v, t)[0], z, FD_STEP)
        worst = max(worst, _rel_err(g, num))
    assert worst < GRAD_RTOL, f"max relative error {worst:.3g}"
    return f"{cases} cases of {size}x{size}, max rel err {worst:.2e}"


GRADIENT_CHECKS = {
    "grad.softmax_ce": grad_softmax_ce,
    "grad.smooth_l1": grad_smooth_l1,
    "grad.binary_ce": grad_binary_ce,
}


# -- engine, geometry, nms, roialign -----------------------------------------

def conv_vs_naive(rng, cases=20):
    worst = 0.0
    for _ in range(cases):
        n, c, o = int(rng.integers(1, 3)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
        h, w = int(rng.integers(3, 12)), int(rng.integers(3, 12))
        k = int(rng.choice([1, 3]))
        d = int(rng.integers(1, 3))
        s = int(rng.integers(1, 3))
        pad = int(rng.integers(0, 3))
        if (h + 2 * pad - d * (k - 1) - 1) < 0 or (w + 2 * pad - d * (k - 1) - 1) < 0:
            continue
        x = rng.normal(size=(n, c, h, w))
        wt = rng.normal(size=(o, c, k, k))
        b = rng.normal(size=o)
        got = conv2d(x, ConvParams(wt, b, s, pad, d))
        ref = oracles.naive_conv2d(x, wt, b, s, pad, d)
        worst = max(worst, float(np.abs(got - ref).max()))
    assert worst <= 1e-10, f"max abs diff {worst:.3g}"
    return f"max abs diff {worst:.2e}"


def quad_roundtrip(rng, cases=10_000):
    x1 = rng.uniform(-500, 500, cases)
    y1 = rng.uniform(-500, 500, cases)
    p = np.stack([x1, y1, x1 + rng.uniform(1, 300, cases), y1 + rng.uniform(1, 300, cases)], axis=1)
    g = rng.uniform(-800, 800, size=(cases, 4, 2))
    err = float(np.abs(quad_decode(quad_encode(g, p), p) - g).max())
    assert err < 1e-9, f"max abs error {err:.3g}"
    return f"{cases} cases, max abs error {err:.2e}"


def rect_roundtrip(rng, cases=10_000):
    def rects():
        x1 = rng.uniform(-500, 500, cases)
        y1 = rng.uniform(-500, 500, cases)
        return np.stack([x1, y1, x1 + rng.uniform(1, 300, cases), y1 + rng.uniform(1, 300, cases)], axis=1)
    g, p = rects(), rects()
    err = float(np.abs(rect_decode(rect_encode(g, p), p) - g).max())
    assert err < 1e-9, f"max abs error {err:.3g}"
    return f"{cases} cases, max abs error {err:.2e}"


def _random_rects(rng, n, span=100.0):
    xy = rng.uniform(0, span, size=(n, 2))
    wh = rng.uniform(5, span / 2, size=(n, 2))
    return np.concatenate([xy, xy + wh], axis=1)


def nms_vs_brute(rng, instances=500):
    for t in range(instances):
        n = int(rng.integers(1, 51))
        thresh = float(rng.choice([0.0, 0.3, 0.5, 0.7, 1.0])) if t % 5 == 0 else float(rng.uniform(0, 1))
        # coarse scores force ties that exercise the id tie-break
        scores = np.round(rng.random(n), 1)
        rects = _random_rects(rng, n)
        got = nms_rect_arrays(rects, scores, thresh).tolist()
        want = oracles.brute_greedy_nms(list(rects), scores, oracles.brute_rect_iou, thresh)
        assert got == want, f"rect instance {t}: {got} != {want}"
        quads = np.stack([oracles.random_convex_quad(rng, rng.uniform(0, 60, 2), (15, 15)) for _ in range(n)])
        got = nms_quad_arrays(quads, scores, thresh).tolist()
        want = oracles.brute_greedy_nms([canonical_convex(q) for q in quads], scores, quad_iou, thresh)
        assert got == want, f"quad instance {t}: {got} != {want}"
    return f"{instances} rect + {instances} quad instances identical"


def quad_iou_vs_monte_carlo(rng, pairs=100, samples=1_000_000):
    worst = 0.0
    for k in range(pairs):
        a = oracles.random_convex_quad(rng, (0, 0), (10, 10))
        b = oracles.random_convex_quad(rng, rng.uniform(-6, 6, 2), (10, 10))
        est = oracles.monte_carlo_iou(a, b, samples, seed=k)
        worst = max(worst, abs(quad_iou(a, b) - est))
    assert worst <= 2e-3, f"max deviation {worst:.3g}"
    for _ in range(200):
        r1, r2 = _random_rects(rng, 2)
        d = abs(quad_iou(AxisRect(*r1).corners(), AxisRect(*r2).corners()) - rect_iou(r1, r2))
        assert d <= 1e-12, f"axis-aligned mismatch {d:.3g}"
    return f"{pairs} pairs, max |IoU - MC| {worst:.2e}; axis-aligned exact"


def roi_affine(rng, cases=20):
    spec = RoiSpec()
    worst = 0.0
    for _ in range(cases):
        h, w = 24, 24
        a, b, c = rng.normal(size=3)
        yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
        feat = (a * xx + b * yy + c)[None, None]
        stride = int(rng.choice([4, 8, 16]))
        scale = 1.0 / stride
        # keep every sample >= 0 and <= size-1 in feature index space
        x1, y1 = rng.uniform(1, 8, 2) * stride
        x2, y2 = x1 + rng.uniform(1, 12) * stride, y1 + rng.uniform(1, 12) * stride
        roi = (x1, y1, x2, y2)
        got = roi_align(feat, roi, scale, spec)[0]
        ys, xs = oracles.roi_sample_points(roi, scale, spec.output_size, spec.samples_per_bin)
        want = a * xs.mean(axis=1)[None, :] + b * ys.mean(axis=1)[:, None] + c
        worst = max(worst, float(np.abs(got - want).max()))
    assert worst <= 1e-9, f"max abs error {worst:.3g}"
    const = roi_align(np.full((1, 2, 9, 9), 3.25), (3.3, 1.7, 20.1, 30.9), 0.25, spec)
    assert np.all(const == 3.25), "constant map not preserved exactly"
    return f"{cases} affine planes, max abs error {worst:.2e}; constant exact"


def anchors_closed_form(rng):
    spec = AnchorSpec()
    for level, scale, stride in (("P2", 32, 4), ("P3", 64, 8), ("P4", 128, 16)):
        fh, fw = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        a = generate_anchors(spec, level, fh, fw)
        assert a.shape == (fh * fw * 6, 4)
        for idx in range(a.shape[0]):
            cell, r = divmod(idx, 6)
            i, j = divmod(cell, fw)
            rho = (0.2, 0.5, 1.0, 2.0, 4.0, 8.0)[r]
            cx, cy = (j + 0.5) * stride, (i + 0.5) * stride
            bw, bh = scale * np.sqrt(rho), scale / np.sqrt(rho)
            want = np.array([cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2])
            assert np.array_equal(a[idx], want), f"{level} anchor {idx}: {a[idx]} != {want}"
    return "P2/P3/P4 lattices exact"


def architecture(rng):
    cfg = NetConfig(channels=8)
    w = init_weights(cfg, seed=int(rng.integers(1 << 31)))
    for size in (64, 128, 256):
        img = rng.random((1, 3, size, size))
        res2, res3, res4 = stub_base(img, w)
        pyr = build_pyramid(res2, res3, res4, w)
        for lv, stride in (("P2", 4), ("P3", 8), ("P4", 16)):
            assert pyr[lv].shape == (1, 8, size // stride, size // stride), f"{lv} at {size}: {pyr[lv].shape}"
        p4 = fpa(res4, w)
        assert p4.shape == (1, 8) + res4.shape[2:], f"FPA at {size}: {p4.shape}"
        for prefix, low, high in (("gau3", res3, p4), ("gau2", res2, pyr["P3"])):
            out = gau(low, high, w, prefix)
            assert out.shape == (1, 8) + low.shape[2:], f"{prefix} at {size}: {out.shape}"
    low = rng.normal(size=(1, 16, 8, 8))
    high = rng.normal(size=(1, 8, 4, 4))
    wz = w.replace("gau3.gate", weight=np.zeros((8, 8, 1, 1)))
    diff = float(np.abs(gau(low, high, wz, "gau3") - bilinear_upsample(high, 8, 8)).max())
    assert diff <= 1e-12, f"zero-gate GAU differs by {diff:.3g}"
    return "strides 4/8/16 at 64/128/256; FPA/GAU shapes hold; zero-gate GAU exact"


def loss_composition(rng):
    cfg = LossConfig()
    for _ in range(100):
        a, b, c = rng.uniform(0, 10, 3)
        r = total_loss(a, b, c, cfg)
        assert abs(r.l_total - (a + b + 0.03125 * c)) <= 1e-12
    # one positive, one negative anchor, computed by hand
    logits = np.array([[0.2, 1.1], [0.4, -0.3]])
    pred = np.array([[0.1, -0.2, 0.05, 1.6], [9.0, 9.0, 9.0, 9.0]])
    target = np.array([[0.0, 0.3, 0.0, 0.1], [0.0, 0.0, 0.0, 0.0]])
    batch = StageBatch(logits, np.array([1, 0]), pred, target)
    total, _, _ = rpn_loss({"P2": batch}, cfg)
    ce_pos = -np.log(np.exp(1.1) / (np.exp(0.2) + np.exp(1.1)))
    ce_neg = -np.log(np.exp(0.4) / (np.exp(0.4) + np.exp(-0.3)))
    loc = 0.5 * 0.1 ** 2 + 0.5 * 0.5 ** 2 + 0.5 * 0.05 ** 2 + (1.5 - 0.5)
    want = (ce_pos + ce_neg) / 2 + 3 * loc
    assert abs(total - want) <= 1e-12, f"{total} != {want}"
    return f"weighted sum exact; two-anchor RPN loss {total:.6f}"


def evaluation_fixture(rng):
    q1 = np.array([[0, 0], [10, 0], [10, 5], [0, 5]], dtype=float)
    q2 = q1 + [20, 0]
    gts = {"img": [GtItem(q1, "a", False), GtItem(q2, "b", False)]}
    r = evaluate({"img": [(q1, 0.9)]}, gts, 0.5)
    assert (r.recall, r.precision) == (0.5, 1.0) and abs(r.f_measure - 2 / 3) < 1e-15, r
    r = evaluate({"img": [(q1, 0.9), (q2, 0.8)]}, gts, 0.5)
    assert (r.recall, r.precision, r.f_measure) == (1.0, 1.0, 1.0), r
    return "R/P/F fixtures exact"


def inference_determinism(rng):
    from pantext.pipeline.config import PipelineConfig
    from pantext.pipeline.image import prepare_image
    from pantext.pipeline.infer import detections_to_json, infer

    rgb = (np.random.default_rng(7).random((64, 64, 3)) * 255).astype(np.uint8)
    img = prepare_image(rgb, 64)
    w = init_weights(NetConfig(), seed=42)
    cfg = PipelineConfig(test_scale=64)
    outs = {detections_to_json("fixture", img, infer(img, w, cfg)) for _ in range(3)}
    outs.add(detections_to_json("fixture", img, infer(img, w, cfg.replace(threads=2, chunk_size=128))))
    assert len(outs) == 1, "inference output differs between runs"
    return "identical JSON across runs and thread counts"


SELFTEST_CHECKS = {
    "tensor.conv_vs_naive": conv_vs_naive,
    "geometry.quad_roundtrip": quad_roundtrip,
    "geometry.rect_roundtrip": rect_roundtrip,
    "geometry.quad_iou_monte_carlo": quad_iou_vs_monte_carlo,
    "nms.brute_force": nms_vs_brute,
    "roialign.affine": roi_affine,
    "anchors.closed_form": anchors_closed_form,
    "network.architecture": architecture,
    "losses.composition": loss_composition,
    **GRADIENT_CHECKS,
    "pipeline.evaluation": evaluation_fixture,
    "pipeline.determinism": inference_determinism,
}


# checks that never touch the compiled kernels run under one backend only
KERNEL_FREE = {"geometry.quad_roundtrip", "geometry.rect_roundtrip", "anchors.closed_form",
               "losses.composition", *GRADIENT_CHECKS}


def run_checks(checks, seed=0, backends=None):
    """Run ``checks`` under each backend (default: all available)."""
    results = []
    previous = backend_name()
    try:
        for n, be in enumerate(backends or available_backends()):
            set_backend(be)
            for name, fn in checks.items():
                if n and name in KERNEL_FREE:
                    continue
                rng = np.random.default_rng(seed)
                t0 = time.perf_counter()
                try:
                    detail, ok = fn(rng), True
                except AssertionError as exc:
                    detail, ok = str(exc) or "assertion failed", False
                results.append(CheckResult(f"{be}:{name}", ok, detail, time.perf_counter() - t0))
    finally:
        set_backend(previous)
    return results
