"""Ground-truth readers for ICDAR quadrilateral and SCUT-CTW1500 polygon files."""

from typing import NamedTuple

import numpy as np

from pantext.errors import FormatError

DONT_CARE = "###"


class GtItem(NamedTuple):
    points: np.ndarray  # (4, 2) for ICDAR, (14, 2) for CTW1500
    text: str
    ignore: bool


def _lines(data):
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise FormatError(f"not UTF-8: {exc}") from None
    elif data.startswith("\ufeff"):
        data = data[1:]
    return data.splitlines()


def parse_icdar_gt(data, path=None):
    """Lines ``x1,y1,...,x4,y4,transcription``; ``###`` marks don't-care."""
    items = []
    for lineno, line in enumerate(_lines(data), 1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) < 9:
            raise FormatError(f"expected 8 coordinates and a transcription, got {len(fields)} fields",
                              line=lineno, path=path)
        try:
            coords = [float(v) for v in fields[:8]]
        except ValueError:
            raise FormatError(f"non-numeric coordinate in {fields[:8]}", line=lineno, path=path) from None
        text = ",".join(fields[8:]).strip()
        items.append(GtItem(np.array(coords).reshape(4, 2), text, text == DONT_CARE))
    return items


def parse_ctw_gt(data, path=None):
    """Lines of 28 comma-separated integers (14 points), optionally followed by text."""
    items = []
    for lineno, line in enumerate(_lines(data), 1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) < 28:
            raise FormatError(f"expected 28 integer coordinates, got {len(fields)} fields", line=lineno, path=path)
        try:
            coords = [int(v) for v in fields[:28]]
        except ValueError:
            raise FormatError("coordinates must be integers", line=lineno, path=path) from None
        text = ",".join(fields[28:]).strip()
        items.append(GtItem(np.array(coords, dtype=np.float64).reshape(14, 2), text, text == DONT_CARE))
    return items


def gt_key(filename):
    """Image key for a GT file name: drop the extension and a ``gt_`` prefix."""
    stem = filename.rsplit("/", 1)[-1]
    stem = stem.rsplit(".", 1)[0] if "." in stem else stem
    return stem[3:] if stem.startswith("gt_") else stem
