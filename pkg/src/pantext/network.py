"""Forward pass: stub base CNN, FPA, GAU, pyramid, RPN heads and RoI head.

Layer names and shapes come from :func:`pantext.weights.layer_table`.
"""

from dataclasses import dataclass

import numpy as np

from pantext import tensor as T
from pantext.errors import ShapeError
from pantext.weights import LEVELS

IN_EPS = 1e-5


@dataclass(frozen=True)
class PyramidFeatures:
    P2: np.ndarray
    P3: np.ndarray
    P4: np.ndarray

    def __getitem__(self, level):
        return getattr(self, level)

    def __post_init__(self):
        h4, w4 = self.P4.shape[2:]
        if self.P3.shape[2:] != (2 * h4, 2 * w4) or self.P2.shape[2:] != (4 * h4, 4 * w4):
            raise ShapeError(f"pyramid resolutions {self.P2.shape[2:]}, {self.P3.shape[2:]}, "
                             f"{self.P4.shape[2:]} are not 4x/2x/1x", dim="height")


@dataclass(frozen=True)
class HeadOutput:
    logits: np.ndarray       # (N, 2) non-text / text
    quad_delta: np.ndarray   # (N, 8)
    mask_logits: np.ndarray  # (N, 1, M, M), or None when the mask branch is skipped


def _conv_relu(x, p):
    return T.relu(T.conv2d(x, p))


def stub_base(image, w):
    """Four conv+ReLU+maxpool stages; returns (res2, res3, res4) at strides 4/8/16."""
    image = T.as_tensor(image)
    _, ch, h, wd = image.shape
    if h % 16 or wd % 16:
        raise ShapeError(f"image size {h}x{wd} must be divisible by 16", dim="height" if h % 16 else "width")
    if ch != w.config.in_channels:
        raise ShapeError(f"image has {ch} channels, expected {w.config.in_channels}", dim="channels")
    x = T.maxpool2(_conv_relu(image, w["base.conv1"]))
    res2 = T.maxpool2(_conv_relu(x, w["base.conv2"]))
    res3 = T.maxpool2(_conv_relu(res2, w["base.conv3"]))
    res4 = T.maxpool2(_conv_relu(res3, w["base.conv4"]))
    return res2, res3, res4


def fpa(res4, w):
    """Feature pyramid attention on the stride-16 features.

    Dilated 3x3 convs (rates 3, 6, 12) are concatenated and reduced to form
    a context map, which gates a 1x1 projection of the input pixel-wise; a
    global-pooling branch is then added. Output has ``ctx`` channels.
    """
    res4 = T.as_tensor(res4)
    h, wd = res4.shape[2:]
    branches = [T.conv2d(res4, w[f"fpa.dil{r}"]) for r in (3, 6, 12)]
    context = T.conv2d(T.concat_channels(branches), w["fpa.ctx_reduce"])
    attended = T.mul(T.conv2d(res4, w["fpa.main"]), context)
    pooled = T.conv2d(T.global_avg_pool(res4), w["fpa.gp"])
    return T.add(attended, T.broadcast_spatial(pooled, h, wd))


def gau(low, high, w, prefix):
    """Global attention upsample.

    The low-level map goes through a 3x3 conv; a channel gate computed from
    the high-level map (1x1 conv, instance norm, ReLU, global average)
    weights it, and the 2x-upsampled high-level map is added.
    """
    low = T.as_tensor(low)
    high = T.as_tensor(high)
    lh, lw = low.shape[2:]
    hh, hw = high.shape[2:]
    if (lh, lw) != (2 * hh, 2 * hw):
        raise ShapeError(f"gau: low resolution {lh}x{lw} is not twice high {hh}x{hw}", dim="height")
    low_p = T.conv2d(low, w[f"{prefix}.low"])
    gate = T.global_avg_pool(T.relu(T.instance_norm(T.conv2d(high, w[f"{prefix}.gate"]), IN_EPS)))
    weighted = T.mul(low_p, T.broadcast_spatial(gate, lh, lw))
    return T.add(weighted, T.bilinear_upsample(high, lh, lw))


def build_pyramid(res2, res3, res4, w):
    p4 = T.conv2d(fpa(res4, w), w["fpa.align"])
    p3 = gau(res3, p4, w, "gau3")
    p2 = gau(res2, p3, w, "gau2")
    return PyramidFeatures(P2=p2, P3=p3, P4=p4)


def rpn_forward(pyr, w):
    """Per-level ``{level: (logits (1, 2k, H, W), deltas (1, 4k, H, W))}``.

    Logit channel ``2a + c`` is class ``c`` (0 = background, 1 = text) of
    anchor ``a``; delta channel ``4a + j`` is (dx, dy, dw, dh)[j].
    """
    out = {}
    for lv in LEVELS:
        hidden = _conv_relu(pyr[lv], w[f"rpn.{lv}.conv"])
        out[lv] = (T.conv2d(hidden, w[f"rpn.{lv}.cls"]), T.conv2d(hidden, w[f"rpn.{lv}.reg"]))
    return out


def rpn_level_outputs(logits, deltas, k):
    """Flatten one level to per-anchor arrays in anchor-lattice order.

    Returns (logits (H*W*k, 2), deltas (H*W*k, 4)).
    """
    _, _, h, wd = logits.shape
    lg = logits[0].reshape(k, 2, h, wd).transpose(2, 3, 0, 1).reshape(-1, 2)
    dl = deltas[0].reshape(k, 4, h, wd).transpose(2, 3, 0, 1).reshape(-1, 4)
    return lg, dl


def head_trunk(roi_feats, w):
    x = _conv_relu(roi_feats, w["head.trunk1"])
    return _conv_relu(x, w["head.trunk2"])


def mask_branch(trunk, w):
    m = w.config.mask_size
    x = trunk
    for i in range(1, 5):
        x = _conv_relu(x, w[f"head.mask{i}"])
    return T.conv2d(T.bilinear_upsample(x, m, m), w["head.mask_out"])


def head_forward_batch(roi_feats, w, with_mask=True):
    """Head on a batch of RoI features (N, C, 7, 7)."""
    roi_feats = T.as_tensor(roi_feats)
    c = w.config.channels
    if roi_feats.shape[1:] != (c, 7, 7):
        raise ShapeError(f"head expects RoI features (N, {c}, 7, 7), got {roi_feats.shape}", dim="channels")
    trunk = head_trunk(roi_feats, w)
    pooled = T.global_avg_pool(trunk)
    logits = T.conv2d(pooled, w["head.cls"]).reshape(-1, 2)
    delta = T.conv2d(pooled, w["head.quad"]).reshape(-1, 8)
    mask = mask_branch(trunk, w) if with_mask else None
    return HeadOutput(logits, delta, mask)


def head_forward(roi_feat, w):
    """Single RoI (C, 7, 7) -> logits (2,), quad delta (8,), mask logits (1, M, M)."""
    roi_feat = np.asarray(roi_feat, dtype=np.float64)
    if roi_feat.ndim != 3:
        raise ShapeError(f"head_forward expects (C, 7, 7), got {roi_feat.shape}", dim="rank")
    out = head_forward_batch(roi_feat[None], w)
    return HeadOutput(out.logits[0], out.quad_delta[0], out.mask_logits[0])


def forward_features(image, w):
    """Image -> (pyramid, rpn outputs)."""
    res2, res3, res4 = stub_base(image, w)
    pyr = build_pyramid(res2, res3, res4, w)
    return pyr, rpn_forward(pyr, w)
