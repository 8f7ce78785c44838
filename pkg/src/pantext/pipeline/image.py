"""Binary PPM (P6) ingestion, test-scale resizing and /16 padding."""

import re
from dataclasses import dataclass

import numpy as np

from pantext.errors import FormatError, ShapeError
from pantext.tensor import bilinear_resize

_HEADER = re.compile(rb"P6(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def decode_ppm(data):
    """Return an (H, W, 3) uint8 array from P6 bytes."""
    if data[:2] != b"P6":
        raise FormatError(f"unsupported image format (magic bytes {bytes(data[:4])!r}); only binary PPM P6 is read")
    m = _HEADER.match(data)
    if m is None:
        raise FormatError("malformed PPM header")
    w, h, maxval = (int(v) for v in m.groups())
    if maxval < 1 or maxval > 255:
        raise FormatError(f"only 8-bit PPM is supported (maxval {maxval})")
    if w < 1 or h < 1:
        raise FormatError(f"empty image {w}x{h}")
    body = data[m.end():m.end() + w * h * 3]
    if len(body) != w * h * 3:
        raise FormatError(f"PPM pixel data truncated ({len(body)} of {w * h * 3} bytes)")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3), maxval


def encode_ppm(rgb):
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes()


@dataclass(frozen=True)
class ImageInput:
    tensor: np.ndarray   # (1, 3, padded_h, padded_w)
    orig_size: tuple     # (h, w)
    resized_size: tuple  # (h, w) before padding
    scale: tuple         # (sy, sx) = resized / original

    @property
    def padding(self):
        """Zero rows/cols added at the bottom/right."""
        return (self.tensor.shape[2] - self.resized_size[0], self.tensor.shape[3] - self.resized_size[1])


def prepare_image(rgb, test_scale, maxval=255):
    """Scale to [0, 1], resize so the shorter side is ``test_scale``, pad to /16."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"expected an (H, W, 3) RGB array, got shape {rgb.shape}", dim="channels")
    h, w = rgb.shape[:2]
    x = rgb.astype(np.float64).transpose(2, 0, 1)[None] / maxval
    s = test_scale / min(h, w)
    rh, rw = max(1, round(h * s)), max(1, round(w * s))
    if (rh, rw) != (h, w):
        x = bilinear_resize(x, rh, rw)
    ph, pw = -(-rh // 16) * 16, -(-rw // 16) * 16
    padded = np.zeros((1, 3, ph, pw))
    padded[:, :, :rh, :rw] = x
    return ImageInput(padded, (h, w), (rh, rw), (rh / h, rw / w))


def load_image(path, test_scale):
    with open(path, "rb") as f:
        data = f.read()
    try:
        rgb, maxval = decode_ppm(data)
    except FormatError as exc:
        raise FormatError(str(exc), path=path) from None
    return prepare_image(rgb, test_scale, maxval)
