"""Command-line entry point.

Exit codes: 0 success, 1 validation failure (bad input file, failed
check), 2 I/O error (missing or unreadable/unwritable path).
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from pantext import weights as weights_io
from pantext._backend import available_backends, backend_name, set_backend
from pantext.anchors import LEVELS, AnchorSpec, generate_anchors
from pantext.errors import PanTextError
from pantext.pipeline.config import PipelineConfig, load_config
from pantext.pipeline.evaluate import evaluate
from pantext.pipeline.gt import gt_key, parse_ctw_gt, parse_icdar_gt
from pantext.pipeline.image import load_image
from pantext.pipeline.infer import detections_from_json, detections_to_json, infer

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

log = logging.getLogger("pantext")


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def cmd_infer(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.threads:
        cfg = cfg.replace(threads=args.threads)
    if args.test_scale:
        cfg = cfg.replace(test_scale=args.test_scale)
    path = args.weights or cfg.weights_path
    if not path:
        raise PanTextError("no weights given (--weights or weights_path in the config)")
    w = weights_io.load(path)
    image = load_image(args.image, cfg.test_scale)
    dets = infer(image, w, cfg)
    key = os.path.splitext(os.path.basename(args.image))[0]
    _write(args.out, detections_to_json(key, image, dets))
    log.info("%s: %d detections", key, len(dets))
    return EXIT_OK


def _read_detections(path):
    files = ([os.path.join(path, f) for f in sorted(os.listdir(path)) if f.endswith(".json")]
             if os.path.isdir(path) else [path])
    out = {}
    for fn in files:
        with open(fn, encoding="utf-8") as f:
            text = f.read()
        try:
            key, dets = detections_from_json(text)
        except (ValueError, KeyError, TypeError) as exc:
            raise PanTextError(f"{fn}: malformed detection file ({exc})") from None
        if key in out:
            raise PanTextError(f"{fn}: duplicate detections for image {key!r}")
        out[key] = dets
    return out


def _read_gt(gt_dir, fmt):
    parse = parse_icdar_gt if fmt == "icdar" else parse_ctw_gt
    gts = {}
    for name in sorted(os.listdir(gt_dir)):
        if not name.endswith(".txt"):
            continue
        fn = os.path.join(gt_dir, name)
        with open(fn, "rb") as f:
            gts[gt_key(name)] = parse(f.read(), path=fn)
    return gts


def cmd_eval(args):
    dets = _read_detections(args.dets)
    gts = _read_gt(args.gt_dir, args.format)
    report = evaluate(dets, gts, args.iou)
    print(f"R={report.recall:.6g} P={report.precision:.6g} F={report.f_measure:.6g}")
    if args.report:
        _write(args.report, json.dumps(report.to_dict(), indent=1) + "\n")
    return EXIT_OK


def cmd_gen_weights(args):
    cfg = weights_io.NetConfig(channels=args.channels)
    w = weights_io.init_weights(cfg, seed=args.seed)
    weights_io.save(w, args.out)
    return EXIT_OK


def cmd_anchors(args):
    spec = AnchorSpec()
    stride = spec.strides[args.level]
    h, w = args.size if len(args.size) == 2 else (args.size[0], args.size[0])
    fh, fw = h // stride, w // stride
    if fh < 1 or fw < 1:
        raise PanTextError(f"image {h}x{w} is smaller than the {args.level} stride {stride}")
    boxes = generate_anchors(spec, args.level, fh, fw)
    doc = {
        "level": args.level, "stride": stride, "scale": spec.scales[args.level],
        "aspect_ratios": list(spec.aspect_ratios), "feature_size": [fh, fw],
        "count": int(boxes.shape[0]), "anchors": boxes.tolist(),
    }
    _write(args.out, json.dumps(doc) + "\n")
    return EXIT_OK


def _run_suite(checks, args):
    from pantext.checks import run_checks

    backends = available_backends() if args.backend == "all" else [args.backend]
    results = run_checks(checks, seed=args.seed, backends=backends)
    return results, all(r.passed for r in results)


def cmd_gradcheck(args):
    from pantext.checks import GRADIENT_CHECKS

    results, ok = _run_suite(GRADIENT_CHECKS, args)
    doc = {"passed": ok, "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail,
                                     "seconds": round(r.seconds, 3)} for r in results]}
    _write(args.out, json.dumps(doc, indent=1) + "\n")
    return EXIT_OK if ok else EXIT_INVALID


def cmd_selftest(args):
    from pantext.checks import SELFTEST_CHECKS

    results, ok = _run_suite(SELFTEST_CHECKS, args)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name:38s} {r.seconds:7.2f}s  {r.detail}")
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_INVALID


def _size(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="pantext", description="Quadrilateral text detector toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--kernels", choices=["native", "python"], help="force a kernel backend")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("infer", help="detect text in one PPM image")
    s.add_argument("--image", required=True)
    s.add_argument("--weights", help="PANW file (overrides weights_path in the config)")
    s.add_argument("--config", help="key = value config file")
    s.add_argument("--out", default="-", help="detection JSON path (default stdout)")
    s.add_argument("--threads", type=_size)
    s.add_argument("--test-scale", type=_size)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("eval", help="recall / precision / F-measure against ground truth")
    s.add_argument("--dets", required=True, help="detection JSON file or directory of them")
    s.add_argument("--gt-dir", required=True)
    s.add_argument("--format", choices=["icdar", "ctw"], default="icdar")
    s.add_argument("--iou", type=float, default=0.5)
    s.add_argument("--report", help="write the full JSON report here")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gen-weights", help="write seeded random weights")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--channels", type=_size, default=weights_io.NetConfig.channels)
    s.set_defaults(func=cmd_gen_weights)

    s = sub.add_parser("anchors", help="dump the anchor lattice of one level as JSON")
    s.add_argument("--level", choices=LEVELS, required=True)
    s.add_argument("--size", type=_size, nargs="+", required=True, metavar="PIXELS",
                   help="image size: one value for square, or H W")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_anchors)

    for name, fn, text in (("gradcheck", cmd_gradcheck, "finite-difference gradient checks (JSON report)"),
                           ("selftest", cmd_selftest, "run every oracle suite")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--backend", choices=["active", "all", "native", "python"], default="active",
                       help="kernel backend(s) to check (default: the active one)")
        if name == "gradcheck":
            s.add_argument("--out", default="-")
        s.set_defaults(func=fn)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "anchors" and len(args.size) > 2:
        parser.error("--size takes one or two values")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.kernels:
            set_backend(args.kernels)
        if getattr(args, "backend", None) == "active":
            args.backend = backend_name()
        return args.func(args)
    except OSError as exc:
        print(f"pantext: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PanTextError, ValueError) as exc:
        print(f"pantext: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
