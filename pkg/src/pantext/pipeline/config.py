"""Pipeline configuration and its flat ``key = value`` text format.

Blank lines and lines starting with ``#`` are ignored. Keys are the field
names of :class:`PipelineConfig`; unknown keys are rejected.
"""

import dataclasses
from dataclasses import dataclass

from pantext.errors import FormatError


@dataclass(frozen=True)
class PipelineConfig:
    top_n: int = 2000
    pre_nms_top_n: int = 6000  # 0 disables the cap before proposal NMS
    rpn_nms_iou: float = 0.7
    skewed_nms_iou: float = 0.3
    score_threshold: float = 0.5  # exclusive
    mask_threshold: float = 0.5
    eval_iou: float = 0.5
    test_scale: int = 1024
    weights_path: str = ""
    seed: int = 42
    threads: int = 1
    chunk_size: int = 128

    def __post_init__(self):
        for name in ("rpn_nms_iou", "skewed_nms_iou", "score_threshold", "mask_threshold", "eval_iou"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.top_n < 0 or self.pre_nms_top_n < 0:
            raise ValueError("top_n and pre_nms_top_n must be non-negative")
        if self.test_scale < 1 or self.threads < 1 or self.chunk_size < 1:
            raise ValueError("test_scale, threads and chunk_size must be positive")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
_CASTS = {"int": int, "float": float, "str": str, int: int, float: float, str: str}


def parse_config(text, path=None):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError("expected key = value", line=lineno, path=path)
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in _TYPES:
            raise FormatError(f"unknown config key {key!r}", line=lineno, path=path)
        try:
            values[key] = _CASTS[_TYPES[key]](val)
        except ValueError:
            raise FormatError(f"bad value {val!r} for {key}", line=lineno, path=path) from None
    try:
        return PipelineConfig(**values)
    except ValueError as exc:
        raise FormatError(str(exc), path=path) from None


def load_config(path):
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read(), path=path)


def dump_config(cfg):
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in dataclasses.fields(cfg))
