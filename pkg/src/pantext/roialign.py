"""RoIAlign pooling and the three-level Skip-RoIAlign fusion.

Coordinates use the half-pixel convention: feature cell ``j`` covers
``[j, j+1)`` in feature space and its value sits at ``j + 0.5``. An image
coordinate maps to feature space by multiplying with ``1 / stride``.
Samples falling outside the map are clamped to the border.
"""

from dataclasses import dataclass

import numpy as np

from pantext._backend import kernels
from pantext.errors import GeometryError, ShapeError
from pantext.tensor import ConvParams, as_tensor, conv2d

PYRAMID_LEVELS = ("P2", "P3", "P4")


@dataclass(frozen=True)
class RoiSpec:
    output_size: tuple = (7, 7)
    samples_per_bin: int = 2
    strides: tuple = (4, 8, 16)  # P2, P3, P4

    def __post_init__(self):
        if min(self.output_size) < 1 or self.samples_per_bin < 1:
            raise ValueError("output size and samples per bin must be positive")


def _rois_array(rois):
    rois = np.asarray(rois, dtype=np.float64).reshape(-1, 4)
    bad = ~((rois[:, 2] > rois[:, 0]) & (rois[:, 3] > rois[:, 1]) & np.isfinite(rois).all(axis=1))
    if bad.any():
        raise GeometryError(f"degenerate roi {rois[np.argmax(bad)].tolist()}")
    return rois


def roi_align_batch(feat, rois, scale, spec=RoiSpec()):
    """Pool every roi (image coordinates, (N, 4)) from a single-image map.

    Returns (N, C, out_h, out_w).
    """
    feat = as_tensor(feat)
    if feat.shape[0] != 1:
        raise ShapeError(f"roi_align needs a single-image feature map, got batch {feat.shape[0]}", dim="batch")
    rois = _rois_array(rois)
    oh, ow = spec.output_size
    return kernels().roi_align(np.ascontiguousarray(feat[0]), np.ascontiguousarray(rois * scale),
                               oh, ow, spec.samples_per_bin)


def roi_align(feat, roi, scale, spec=RoiSpec()):
    """Single-roi form; returns (C, out_h, out_w)."""
    return roi_align_batch(feat, [roi], scale, spec)[0]


def skip_roi_align_batch(pyramid, rois, reduce, spec=RoiSpec()):
    """RoIAlign on P2, P3 and P4, channel concat in that order, 1x1 reduce.

    ``pyramid`` is any mapping/object with ``P2``, ``P3``, ``P4`` tensors.
    Returns (N, C, 7, 7).
    """
    pooled = []
    for level, stride in zip(PYRAMID_LEVELS, spec.strides):
        feat = pyramid.get(level) if isinstance(pyramid, dict) else getattr(pyramid, level, None)
        if feat is None:
            raise ShapeError(f"pyramid is missing level {level}", dim=level)
        pooled.append(roi_align_batch(feat, rois, 1.0 / stride, spec))
    stacked = np.concatenate(pooled, axis=1)
    if not isinstance(reduce, ConvParams):
        raise TypeError("reduce must be ConvParams")
    return conv2d(stacked, reduce)


def skip_roi_align(pyramid, roi, reduce, spec=RoiSpec()):
    return skip_roi_align_batch(pyramid, [roi], reduce, spec)[0]
