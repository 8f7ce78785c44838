"""Forward-only NCHW tensor primitives in float64.

Tensors are plain ``numpy.ndarray`` objects of rank 4 (batch, channels,
height, width). Every function returns a new array and leaves its inputs
untouched.
"""

from dataclasses import dataclass

import numpy as np

from pantext._backend import kernels
from pantext.errors import ShapeError

_DIMS = ("batch", "channels", "height", "width")


def as_tensor(x):
    """Return ``x`` as a C-contiguous float64 rank-4 array."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ShapeError(f"expected a rank-4 NCHW tensor, got shape {arr.shape}", dim="rank")
    return arr


def _check_same(x, y, what):
    for d, (a, b) in enumerate(zip(x.shape, y.shape)):
        if a != b:
            raise ShapeError(f"{what}: {_DIMS[d]} mismatch ({a} vs {b})", dim=_DIMS[d])


@dataclass(frozen=True)
class ConvParams:
    """Weights (out_ch, in_ch, kh, kw), bias (out_ch,) and geometry of one conv layer."""

    weight: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0
    dilation: int = 1

    def __post_init__(self):
        w = np.ascontiguousarray(self.weight, dtype=np.float64)
        b = np.ascontiguousarray(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 4:
            raise ShapeError(f"conv weight must be rank 4, got {w.shape}", dim="rank")
        if b.shape[0] != w.shape[0]:
            raise ShapeError(f"bias length {b.shape[0]} != out channels {w.shape[0]}", dim="out_channels")
        if w.shape[2] % 2 == 0 or w.shape[3] % 2 == 0:
            raise ShapeError(f"kernel size must be odd, got {w.shape[2]}x{w.shape[3]}", dim="kernel")
        if self.stride < 1 or self.dilation < 1 or self.padding < 0:
            raise ValueError("stride and dilation must be >= 1, padding >= 0")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_ch(self):
        return self.weight.shape[1]

    @property
    def out_ch(self):
        return self.weight.shape[0]

    @classmethod
    def same(cls, weight, bias, dilation=1):
        """Stride-1 conv whose padding keeps spatial size (odd kernels)."""
        k = np.shape(weight)[2]
        return cls(weight, bias, stride=1, padding=dilation * (k // 2), dilation=dilation)


def conv2d(x, p):
    """2-D cross-correlation (no kernel flip) plus bias."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    if c != p.in_ch:
        raise ShapeError(f"conv2d: input has {c} channels, weights expect {p.in_ch}", dim="channels")
    kh, kw = p.weight.shape[2:]
    oh = (h + 2 * p.padding - p.dilation * (kh - 1) - 1) // p.stride + 1
    ow = (w + 2 * p.padding - p.dilation * (kw - 1) - 1) // p.stride + 1
    if oh < 1:
        raise ShapeError(f"conv2d: output height {oh} < 1", dim="height")
    if ow < 1:
        raise ShapeError(f"conv2d: output width {ow} < 1", dim="width")
    if kh == 1 and kw == 1 and p.stride == 1 and p.padding == 0:
        cols = x.reshape(n, c, h * w)
    else:
        cols = kernels().im2col(x, kh, kw, p.stride, p.padding, p.dilation)
    out = np.matmul(p.weight.reshape(p.out_ch, -1), cols)
    out += p.bias[None, :, None]
    return out.reshape(n, p.out_ch, oh, ow)


def global_avg_pool(x):
    x = as_tensor(x)
    if x.shape[2] < 1 or x.shape[3] < 1:
        raise ShapeError("global_avg_pool: empty spatial extent", dim="height" if x.shape[2] < 1 else "width")
    return x.mean(axis=(2, 3), keepdims=True)


def _source_index(out_size, in_size):
    scale = in_size / out_size
    src = (np.arange(out_size) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, in_size - 1)
    return lo, hi, src - lo


def bilinear_upsample(x, out_h, out_w):
    """Bilinear enlargement with the half-pixel (align_corners=False) convention."""
    x = as_tensor(x)
    h, w = x.shape[2:]
    if out_h < h or out_w < w:
        raise ShapeError(f"bilinear_upsample: target {out_h}x{out_w} smaller than input {h}x{w}",
                         dim="height" if out_h < h else "width")
    return bilinear_resize(x, out_h, out_w)


def bilinear_resize(x, out_h, out_w):
    """Bilinear resize in either direction (no antialiasing when shrinking)."""
    x = as_tensor(x)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"bilinear resize: target {out_h}x{out_w} has a zero dimension",
                         dim="height" if out_h < 1 else "width")
    h, w = x.shape[2:]
    if (out_h, out_w) == (h, w):
        return x.copy()
    y0, y1, fy = _source_index(out_h, h)
    x0, x1, fx = _source_index(out_w, w)
    fy = fy[:, None]
    fx = fx[None, :]
    top = x[:, :, y0][:, :, :, x0] * (1 - fx) + x[:, :, y0][:, :, :, x1] * fx
    bot = x[:, :, y1][:, :, :, x0] * (1 - fx) + x[:, :, y1][:, :, :, x1] * fx
    return top * (1 - fy) + bot * fy


def instance_norm(x, eps=1e-5):
    """Per-(sample, channel) normalisation without affine parameters."""
    x = as_tensor(x)
    if x.shape[2] * x.shape[3] < 1:
        raise ShapeError("instance_norm: empty spatial extent", dim="height")
    mean = x.mean(axis=(2, 3), keepdims=True)
    var = ((x - mean) ** 2).mean(axis=(2, 3), keepdims=True)
    return (x - mean) / np.sqrt(var + eps)


def add(x, y):
    x, y = as_tensor(x), as_tensor(y)
    _check_same(x, y, "add")
    return x + y


def mul(x, y):
    x, y = as_tensor(x), as_tensor(y)
    _check_same(x, y, "mul")
    return x * y


def elementwise(x, y, op):
    if op == "add":
        return add(x, y)
    if op == "mul":
        return mul(x, y)
    raise ValueError(f"unknown elementwise op {op!r}")


def broadcast_spatial(v, h, w):
    """Tile a (N, C, 1, 1) tensor to (N, C, h, w)."""
    v = as_tensor(v)
    if v.shape[2:] != (1, 1):
        raise ShapeError(f"broadcast_spatial expects 1x1 spatial input, got {v.shape[2:]}", dim="height")
    return np.broadcast_to(v, (v.shape[0], v.shape[1], h, w)).copy()


def relu(x):
    return np.maximum(as_tensor(x), 0.0)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softmax_channels(x):
    x = as_tensor(x)
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def concat_channels(xs):
    xs = [as_tensor(t) for t in xs]
    if not xs:
        raise ShapeError("concat_channels: nothing to concatenate", dim="channels")
    ref = xs[0]
    for t in xs[1:]:
        for d in (0, 2, 3):
            if t.shape[d] != ref.shape[d]:
                raise ShapeError(f"concat_channels: {_DIMS[d]} mismatch ({t.shape[d]} vs {ref.shape[d]})",
                                 dim=_DIMS[d])
    return np.concatenate(xs, axis=1)


def maxpool2(x):
    """2x2 max pooling with stride 2; odd trailing rows/cols are dropped."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool2 needs spatial size >= 2, got {h}x{w}", dim="height" if h < 2 else "width")
    h2, w2 = h // 2, w // 2
    v = x[:, :, :2 * h2, :2 * w2].reshape(n, c, h2, 2, w2, 2)
    return v.max(axis=(3, 5))
