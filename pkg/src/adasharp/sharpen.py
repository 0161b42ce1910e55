"""Region-adaptive unsharp masking driven by a CU-size partition mask."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .degradation import DEFAULT_ALPHA_TABLE, AlphaTable, build_hard_alpha_map, gaussian_blur_3x3
from .errors import DimensionError
from .frame_io import Frame, to_uint8
from .partition import PartitionMask

BLUR_TAPS = (3, 5)


def binomial_blur(plane, taps: int = 3) -> np.ndarray:
    """Separable binomial blur with replicated edges (3 or 5 taps)."""
    if taps == 3:
        return gaussian_blur_3x3(plane)
    if taps != 5:
        raise ValueError(f"blur taps must be one of {BLUR_TAPS}, got {taps}")
    kernel = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    out = np.asarray(plane, dtype=np.float64)
    for axis in (1, 0):
        out = ndimage.correlate1d(out, kernel, axis=axis, mode="nearest")
    return out


def build_alpha_map(
    mask: PartitionMask,
    table: AlphaTable = DEFAULT_ALPHA_TABLE,
    smooth_sigma: float = 2.0,
    shape=None,
) -> np.ndarray:
    """Per-pixel strength map: table lookup, then optional Gaussian smoothing.

    The smoothing kernel is truncated at radius ``ceil(3 * sigma)`` and
    renormalized; edges are replicated.  ``smooth_sigma == 0`` returns the
    hard lookup map unchanged.
    """
    if not (math.isfinite(smooth_sigma) and smooth_sigma >= 0):
        raise ValueError(f"smooth_sigma must be finite and >= 0, got {smooth_sigma}")
    hard = build_hard_alpha_map(mask, table, shape)
    if smooth_sigma == 0:
        return hard
    radius = math.ceil(3.0 * smooth_sigma)
    return ndimage.gaussian_filter(hard, smooth_sigma, mode="nearest", radius=radius)


def usm_plane(plane, alpha, taps: int = 3) -> np.ndarray:
    """Unclamped float output of ``I + a * (I - blur(I))``."""
    plane = np.asarray(plane, dtype=np.float64)
    return plane + alpha * (plane - binomial_blur(plane, taps))


def usm_uniform(frame: Frame, alpha: float, taps: int = 3) -> Frame:
    if not math.isfinite(alpha):
        raise ValueError("alpha must be finite")
    return frame.with_luma(to_uint8(usm_plane(frame.luma, float(alpha), taps)))


def sharpen_adaptive(frame: Frame, amap: np.ndarray, taps: int = 3) -> Frame:
    amap = np.asarray(amap, dtype=np.float64)
    if amap.shape != frame.luma.shape:
        raise DimensionError(
            f"alpha map is {amap.shape[1]}x{amap.shape[0]} but frame is {frame.width}x{frame.height}"
        )
    return frame.with_luma(to_uint8(usm_plane(frame.luma, amap, taps)))


def cu_labels(mask: PartitionMask) -> np.ndarray:
    """Integer id of the CU covering each pixel (equal ids = same CU)."""
    sizes = mask.sizes.astype(np.int64)
    ys, xs = np.indices(mask.shape)
    stride = mask.width + 64
    return (ys // sizes * sizes) * stride + xs // sizes * sizes


def seam_score(plane, mask: PartitionMask) -> float:
    """Mean |difference| of adjacent pixel pairs straddling a CU boundary,
    minus the same mean over pairs inside one CU.

    Pairs are horizontal and vertical neighbours.  Returns 0.0 when either
    group is empty.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.shape != mask.shape:
        raise DimensionError("plane and mask shapes differ")
    labels = cu_labels(mask)
    diffs = [np.abs(np.diff(plane, axis=1)), np.abs(np.diff(plane, axis=0))]
    crossings = [np.diff(labels, axis=1) != 0, np.diff(labels, axis=0) != 0]
    d = np.concatenate([x.ravel() for x in diffs])
    across = np.concatenate([x.ravel() for x in crossings])
    if across.all() or not across.any():
        return 0.0
    return float(d[across].mean() - d[~across].mean())
