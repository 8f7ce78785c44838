"""Model weights: layer table, seeded initialisation and the PANW file format.

PANW layout (little-endian)::

    b"PANW"  u16 version
    repeated until EOF:
        u16 name_len, name (UTF-8), u8 rank, u32 dims[rank], f64 payload[prod(dims)]

Each conv layer ``name`` is stored as two records, ``name.weight`` (rank 4)
and ``name.bias`` (rank 1). ``meta.config`` holds (channels, ctx_channels,
num_anchors) and ``meta.seed`` the seed split into two 32-bit halves.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from pantext.errors import ShapeError, WeightsError
from pantext.tensor import ConvParams

MAGIC = b"PANW"
VERSION = 1
INIT_STD = 0.01

LEVELS = ("P2", "P3", "P4")


@dataclass(frozen=True)
class NetConfig:
    channels: int = 32
    ctx_channels: int = 0  # 0 means "same as channels"
    num_anchors: int = 6
    mask_size: int = 14
    in_channels: int = 3

    @property
    def ctx(self):
        return self.ctx_channels or self.channels


def layer_table(cfg):
    """Ordered ``name -> (out_ch, in_ch, kernel, dilation)`` for every conv."""
    c, x, k = cfg.channels, cfg.ctx, cfg.num_anchors
    t = {
        "base.conv1": (c, cfg.in_channels, 3, 1),
        "base.conv2": (c, c, 3, 1),
        "base.conv3": (2 * c, c, 3, 1),
        "base.conv4": (4 * c, 2 * c, 3, 1),
        "fpa.dil3": (x, 4 * c, 3, 3),
        "fpa.dil6": (x, 4 * c, 3, 6),
        "fpa.dil12": (x, 4 * c, 3, 12),
        "fpa.ctx_reduce": (x, 3 * x, 1, 1),
        "fpa.main": (x, 4 * c, 1, 1),
        "fpa.gp": (x, 4 * c, 1, 1),
        "fpa.align": (c, x, 1, 1),
        "gau3.low": (c, 2 * c, 3, 1),
        "gau3.gate": (c, c, 1, 1),
        "gau2.low": (c, c, 3, 1),
        "gau2.gate": (c, c, 1, 1),
    }
    for lv in LEVELS:
        t[f"rpn.{lv}.conv"] = (c, c, 3, 1)
        t[f"rpn.{lv}.cls"] = (2 * k, c, 1, 1)
        t[f"rpn.{lv}.reg"] = (4 * k, c, 1, 1)
    t["roi.reduce"] = (c, 3 * c, 1, 1)
    t["head.trunk1"] = (2 * c, c, 3, 1)
    t["head.trunk2"] = (2 * c, 2 * c, 3, 1)
    t["head.cls"] = (2, 2 * c, 1, 1)
    t["head.quad"] = (8, 2 * c, 1, 1)
    for i in range(1, 5):
        t[f"head.mask{i}"] = (2 * c, 2 * c, 3, 1)
    t["head.mask_out"] = (1, 2 * c, 1, 1)
    return t


@dataclass
class ModelWeights:
    config: NetConfig
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __getitem__(self, name):
        try:
            return self.params[name]
        except KeyError:
            raise WeightsError(f"missing layer {name!r}") from None

    def replace(self, name, weight=None, bias=None):
        """Copy of these weights with one layer's arrays swapped."""
        old = self[name]
        try:
            new = ConvParams(old.weight if weight is None else weight, old.bias if bias is None else bias,
                             old.stride, old.padding, old.dilation)
        except ShapeError as exc:
            raise WeightsError(f"layer {name!r}: {exc}") from None
        params = dict(self.params)
        params[name] = new
        out = ModelWeights(self.config, params, self.seed)
        out.validate()
        return out

    def validate(self):
        table = layer_table(self.config)
        for name, (o, i, k, _) in table.items():
            p = self[name]
            if p.weight.shape != (o, i, k, k):
                raise WeightsError(f"layer {name!r}: weight shape {p.weight.shape}, expected {(o, i, k, k)}")
        extra = set(self.params) - set(table)
        if extra:
            raise WeightsError(f"unknown layers {sorted(extra)}")


def _conv(weight, bias, dilation):
    return ConvParams.same(weight, bias, dilation=dilation)


def init_weights(cfg=NetConfig(), seed=0, std=INIT_STD):
    """Gaussian(0, std) kernels and zero biases, drawn in layer-table order."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, (o, i, k, d) in layer_table(cfg).items():
        params[name] = _conv(rng.normal(0.0, std, size=(o, i, k, k)), np.zeros(o), d)
    return ModelWeights(cfg, params, int(seed))


def zero_weights(cfg=NetConfig()):
    params = {name: _conv(np.zeros((o, i, k, k)), np.zeros(o), d)
              for name, (o, i, k, d) in layer_table(cfg).items()}
    return ModelWeights(cfg, params, 0)


def _record(name, arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    raw = name.encode("utf-8")
    head = struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def dumps(weights):
    seed = int(weights.seed) & 0xFFFFFFFFFFFFFFFF
    cfg = weights.config
    parts = [MAGIC, struct.pack("<H", VERSION),
             _record("meta.config", [cfg.channels, cfg.ctx_channels, cfg.num_anchors]),
             _record("meta.seed", [seed >> 32, seed & 0xFFFFFFFF])]
    for name in layer_table(cfg):
        p = weights[name]
        parts.append(_record(f"{name}.weight", p.weight))
        parts.append(_record(f"{name}.bias", p.bias))
    return b"".join(parts)


def loads(data):
    if data[:4] != MAGIC:
        raise WeightsError(f"not a PANW file (magic {data[:4]!r})")
    if len(data) < 6:
        raise WeightsError("truncated header")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise WeightsError(f"unsupported PANW version {version}")
    pos = 6
    records = {}
    try:
        while pos < len(data):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            if pos + 8 * count > len(data):
                raise WeightsError(f"record {name!r} truncated")
            records[name] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(dims).astype(np.float64)
            pos += 8 * count
    except struct.error as exc:
        raise WeightsError(f"truncated record at byte {pos}") from exc
    except UnicodeDecodeError as exc:
        raise WeightsError(f"bad layer name at byte {pos}") from exc
    if "meta.config" not in records:
        raise WeightsError("missing meta.config record")
    c, x, k = (int(v) for v in records.pop("meta.config"))
    cfg = NetConfig(channels=c, ctx_channels=x, num_anchors=k)
    hi, lo = (int(v) for v in records.pop("meta.seed", np.zeros(2)))
    params = {}
    for name, (_, _, _, d) in layer_table(cfg).items():
        try:
            params[name] = _conv(records.pop(f"{name}.weight"), records.pop(f"{name}.bias"), d)
        except KeyError:
            raise WeightsError(f"missing layer {name!r}") from None
        except ShapeError as exc:
            raise WeightsError(f"layer {name!r}: {exc}") from None
    if records:
        raise WeightsError(f"unknown records {sorted(records)}")
    w = ModelWeights(cfg, params, (hi << 32) | lo)
    w.validate()
    return w


def save(weights, path):
    with open(path, "wb") as f:
        f.write(dumps(weights))


def load(path):
    with open(path, "rb") as f:
        return loads(f.read())
