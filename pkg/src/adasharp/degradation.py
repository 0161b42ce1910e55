"""Region-adaptive blur degradation used to build low-quality/ground-truth pairs.

The low-quality frame is ``LQ = (GT + a * B) / (1 + a)`` with a per-pixel
strength ``a`` looked up from the CU size covering the pixel.  In *direct*
mode ``B`` is the blur of GT.  In *fixed-point* mode ``B`` is the blur of LQ
itself, which makes LQ the exact preimage of GT under unsharp masking with the
same strengths; it is solved by iterating the contraction
``X -> (GT + a * blur(X)) / (1 + a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DimensionError
from .frame_io import Frame, to_uint8
from .partition import CU_SIZES, PartitionMask


@dataclass(frozen=True)
class AlphaTable:
    """Maps each CU size (8, 16, 32, 64) to a non-negative strength."""

    alpha_by_size: dict = field(
        default_factory=lambda: {8: 1.5, 16: 3.0, 32: 3.0, 64: 1.5}
    )

    def __post_init__(self):
        table = {int(k): float(v) for k, v in dict(self.alpha_by_size).items()}
        if sorted(table) != list(CU_SIZES):
            raise ValueError(f"alpha table must map exactly the sizes {CU_SIZES}, got {sorted(table)}")
        for size, alpha in table.items():
            if not math.isfinite(alpha) or alpha < 0:
                raise ValueError(f"alpha for {size}x{size} must be finite and >= 0, got {alpha}")
        object.__setattr__(self, "alpha_by_size", table)

    def __getitem__(self, size: int) -> float:
        return self.alpha_by_size[size]

    @classmethod
    def parse(cls, text: str) -> "AlphaTable":
        """Parse ``"8:1.5,16:3.0,32:3.0,64:1.5"``."""
        table = {}
        for item in text.split(","):
            try:
                size, alpha = item.split(":")
                table[int(size)] = float(alpha)
            except ValueError:
                raise ValueError(f"bad alpha table entry {item!r}; expected SIZE:ALPHA") from None
        return cls(table)

    @classmethod
    def uniform(cls, alpha: float) -> "AlphaTable":
        return cls({s: alpha for s in CU_SIZES})

    def format(self) -> str:
        return ",".join(f"{s}:{self.alpha_by_size[s]:g}" for s in CU_SIZES)

    @property
    def min(self) -> float:
        return min(self.alpha_by_size.values())

    @property
    def max(self) -> float:
        return max(self.alpha_by_size.values())


DEFAULT_ALPHA_TABLE = AlphaTable()


def gaussian_blur_3x3(plane) -> np.ndarray:
    """[1, 2, 1] / 4 binomial blur along rows, then columns; edges replicated."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or plane.size == 0:
        raise ValueError("blur needs a non-empty 2-D plane")
    p = np.pad(plane, ((0, 0), (1, 1)), mode="edge")
    rows = (p[:, :-2] + 2.0 * p[:, 1:-1] + p[:, 2:]) / 4.0
    p = np.pad(rows, ((1, 1), (0, 0)), mode="edge")
    return (p[:-2] + 2.0 * p[1:-1] + p[2:]) / 4.0


def build_hard_alpha_map(mask: PartitionMask, table: AlphaTable = DEFAULT_ALPHA_TABLE, shape=None) -> np.ndarray:
    if shape is not None and tuple(shape) != mask.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match frame shape {tuple(shape)}")
    lut = np.zeros(max(CU_SIZES) + 1, dtype=np.float64)
    for size in CU_SIZES:
        lut[size] = table[size]
    return lut[mask.sizes]


def degrade_direct_plane(gt, alpha) -> np.ndarray:
    gt = np.asarray(gt, dtype=np.float64)
    return (gt + alpha * gaussian_blur_3x3(gt)) / (1.0 + alpha)


@dataclass
class FixedPointResult:
    plane: np.ndarray
    iterations: int
    residuals: list  # sup-norm change of each iteration


def degrade_fixed_point_plane(gt, alpha, tol: float = 1e-6, max_iter: int = 1000) -> FixedPointResult:
    """Solve ``X = (GT + a * blur(X)) / (1 + a)`` by fixed-point iteration from GT.

    The map contracts in the sup norm by ``max(a) / (1 + max(a))``.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    gt = np.asarray(gt, dtype=np.float64)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), gt.shape)
    scale = 1.0 / (1.0 + alpha)
    x = gt
    residuals = []
    for iteration in range(1, max_iter + 1):
        nxt = (gt + alpha * gaussian_blur_3x3(x)) * scale
        residual = float(np.max(np.abs(nxt - x)))
        residuals.append(residual)
        x = nxt
        if residual < tol:
            return FixedPointResult(x, iteration, residuals)
    raise ConvergenceError(f"fixed-point degradation did not converge in {max_iter} iterations", residuals[-1])


def _check_mask(frame: Frame, mask: PartitionMask):
    if mask.shape != frame.luma.shape:
        raise DimensionError(
            f"mask is {mask.width}x{mask.height} but frame is {frame.width}x{frame.height}"
        )


def degrade_direct(gt: Frame, mask: PartitionMask, table: AlphaTable = DEFAULT_ALPHA_TABLE) -> Frame:
    _check_mask(gt, mask)
    alpha = build_hard_alpha_map(mask, table)
    return gt.with_luma(to_uint8(degrade_direct_plane(gt.luma, alpha)))


def degrade_fixed_point(
    gt: Frame,
    mask: PartitionMask,
    table: AlphaTable = DEFAULT_ALPHA_TABLE,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> Frame:
    _check_mask(gt, mask)
    alpha = build_hard_alpha_map(mask, table)
    result = degrade_fixed_point_plane(gt.luma, alpha, tol, max_iter)
    return gt.with_luma(to_uint8(result.plane))
