"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 256]

Each workload runs under both backends on identical inputs; the script
checks that the outputs agree before reporting median times.
"""

import argparse
import statistics
import time

import numpy as np

from pantext._backend import available_backends, kernels, set_backend
from pantext.network import forward_features
from pantext.oracles import random_convex_quad
from pantext.weights import NetConfig, init_weights


def _median_time(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def workloads(size, rng):
    x = rng.normal(size=(1, 32, size // 4, size // 4))
    feat = rng.normal(size=(32, size // 4, size // 4))
    xy = rng.uniform(0, size / 2, size=(512, 2))
    rois = np.concatenate([xy, xy + rng.uniform(4, size / 4, size=(512, 2))], axis=1) / 4
    quads = np.stack([random_convex_quad(rng, rng.uniform(0, 200, 2), (30, 30)) for _ in range(400)])
    xy = rng.uniform(0, 200, size=(2000, 2))
    rects = np.concatenate([xy, xy + rng.uniform(5, 60, size=(2000, 2))], axis=1)
    image = rng.random((1, 3, size, size))
    w = init_weights(NetConfig(), seed=0)
    return {
        "im2col 3x3": lambda: kernels().im2col(x, 3, 3, 1, 1, 1),
        "roi_align 512 rois": lambda: kernels().roi_align(feat, rois, 7, 7, 2),
        "convex_iou_many 400x400": lambda: np.stack([kernels().convex_iou_many(q, quads) for q in quads]),
        "nms_rects 2000": lambda: kernels().nms_rects(rects, 0.7),
        "nms_quads 400": lambda: kernels().nms_quads(quads, 0.3),
        f"forward_features {size}x{size}": lambda: forward_features(image, w)[0].P2,
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--size", type=int, default=256, help="square image side for the conv workloads")
    args = p.parse_args(argv)

    backends = available_backends()
    if "native" not in backends:
        print("compiled kernels are not built; only the python backend is available")
    jobs = workloads(args.size, np.random.default_rng(0))
    print(f"{'workload':28s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in jobs.items():
        times, outs = [], []
        for b in backends:
            set_backend(b)
            t, out = _median_time(fn, args.repeat)
            times.append(t)
            outs.append(np.asarray(out))
        for o in outs[1:]:
            if not np.allclose(o, outs[0], rtol=1e-12, atol=1e-12):
                raise SystemExit(f"{name}: backends disagree")
        row = f"{name:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[backends.index('python')] / times[backends.index('native')]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
