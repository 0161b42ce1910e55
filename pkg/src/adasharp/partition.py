"""Rate-distortion optimal quadtree partitioning of 64x64 CTUs.

Each candidate CU is scored with a DC model: its distortion is the SSE of the
block against its own mean, and its rate is a fixed number of header bits per
leaf plus bits per split flag.  The optimal tree is found bottom-up, one
vectorized pass per quadtree level over every CTU of the frame at once.

For integer input the block sums are kept in int64, so every cost is a dyadic
rational computed without rounding (given dyadic ``lambda_rdo``/bit costs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import InvalidMaskError

CTU_SIZE = 64
MIN_CU = 8
CU_SIZES = (8, 16, 32, 64)


@dataclass(frozen=True)
class RdoParams:
    lambda_rdo: float = 10.0
    leaf_bits: float = 32.0
    split_bits: float = 1.0

    def __post_init__(self):
        values = (self.lambda_rdo, self.leaf_bits, self.split_bits)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"RDO parameters must be finite, got {values}")
        if self.lambda_rdo < 0:
            raise ValueError("lambda_rdo must be >= 0")
        if self.leaf_bits <= 0:
            raise ValueError("leaf_bits must be > 0")
        if self.split_bits < 0:
            raise ValueError("split_bits must be >= 0")


@dataclass(frozen=True)
class QuadNode:
    """A node of a CTU quadtree; ``children`` is None for a leaf CU."""

    x: int
    y: int
    size: int
    children: Optional[tuple] = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def leaves(self) -> Iterator["QuadNode"]:
        if self.children is None:
            yield self
        else:
            for child in self.children:
                yield from child.leaves()

    @property
    def leaf_count(self) -> int:
        return sum(1 for _ in self.leaves())

    @property
    def split_count(self) -> int:
        if self.children is None:
            return 0
        return 1 + sum(child.split_count for child in self.children)

    def paint(self, sizes: np.ndarray) -> None:
        """Write leaf CU sizes into ``sizes`` (indexed relative to this CTU)."""
        for leaf in self.leaves():
            sizes[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size] = leaf.size


class PartitionMask:
    """Per-pixel CU-size map, quadtree-consistent within 64x64 CTUs."""

    def __init__(self, sizes):
        sizes = np.array(sizes, dtype=np.uint8, copy=True)
        if sizes.ndim != 2 or sizes.size == 0:
            raise ValueError(f"mask must be a non-empty 2-D array, got shape {sizes.shape}")
        bad = ~np.isin(sizes, CU_SIZES)
        if bad.any():
            y, x = np.argwhere(bad)[0]
            raise InvalidMaskError(f"mask value {sizes[y, x]} is not a CU size", int(x), int(y))
        _check_quadtree(sizes)
        sizes.setflags(write=False)
        self.sizes = sizes

    @property
    def width(self) -> int:
        return self.sizes.shape[1]

    @property
    def height(self) -> int:
        return self.sizes.shape[0]

    @property
    def shape(self) -> tuple:
        return self.sizes.shape

    def leaf_counts(self) -> dict:
        """Number of (possibly border-cropped) leaf CUs of each size."""
        counts = {}
        for s in CU_SIZES:
            blocks = _blocks(np.pad(self.sizes, _pad_to(self.sizes.shape, s)), s)
            counts[s] = int((blocks == s).any(axis=(1, 3)).sum())
        return counts

    def leaf_count(self) -> int:
        return sum(self.leaf_counts().values())

    @classmethod
    def uniform(cls, height: int, width: int, size: int) -> "PartitionMask":
        return cls(np.full((height, width), size, dtype=np.uint8))

    def __eq__(self, other):
        if not isinstance(other, PartitionMask):
            return NotImplemented
        return np.array_equal(self.sizes, other.sizes)

    __hash__ = None

    def __repr__(self):
        return f"PartitionMask({self.width}x{self.height}, leaves={self.leaf_counts()})"


def _pad_to(shape, multiple):
    return [(0, -n % multiple) for n in shape]


def _blocks(array: np.ndarray, s: int) -> np.ndarray:
    """View ``array`` (dims multiple of s) as ``(rows, s, cols, s)``."""
    h, w = array.shape
    return array.reshape(h // s, s, w // s, s)


def _check_quadtree(sizes: np.ndarray) -> None:
    for s in CU_SIZES:
        # 0 marks padding outside the frame; it never breaks consistency.
        blocks = _blocks(np.pad(sizes, _pad_to(sizes.shape, s)), s)
        has = (blocks == s).any(axis=(1, 3))
        uniform = ((blocks == s) | (blocks == 0)).all(axis=(1, 3))
        broken = np.argwhere(has & ~uniform)
        if len(broken):
            by, bx = broken[0]
            block = blocks[by, :, bx, :]
            iy, ix = np.argwhere((block != s) & (block != 0))[0]
            raise InvalidMaskError(
                f"quadtree-inconsistent mask: {s}x{s} CU at ({bx * s}, {by * s}) "
                f"contains size {block[iy, ix]}",
                int(bx * s + ix),
                int(by * s + iy),
            )


def leaf_distortion(block) -> float:
    """SSE of ``block`` against its own mean (N times its variance)."""
    block = np.asarray(block)
    if np.issubdtype(block.dtype, np.integer):
        values = block.astype(np.int64)
        n = values.size
        s1 = int(values.sum())
        s2 = int((values * values).sum())
        return (n * s2 - s1 * s1) / n
    values = block.astype(np.float64)
    return float(((values - values.mean()) ** 2).sum())


def _level_sse(plane: np.ndarray) -> dict:
    """Per-block SSE arrays for every CU size, keyed by size."""
    sse = {}
    if np.issubdtype(plane.dtype, np.integer):
        values = plane.astype(np.int64)
        s1 = _blocks(values, MIN_CU).sum(axis=(1, 3))
        s2 = _blocks(values * values, MIN_CU).sum(axis=(1, 3))
        for s in CU_SIZES:
            if s > MIN_CU:
                s1 = _blocks(s1, 2).sum(axis=(1, 3))
                s2 = _blocks(s2, 2).sum(axis=(1, 3))
            n = s * s
            # Exact: the numerator stays below 2**53 and n is a power of two.
            sse[s] = (n * s2 - s1 * s1).astype(np.float64) / n
    else:
        values = plane.astype(np.float64)
        for s in CU_SIZES:
            blocks = _blocks(values, s)
            centered = blocks - blocks.mean(axis=(1, 3), keepdims=True)
            sse[s] = (centered * centered).sum(axis=(1, 3))
    return sse


def _solve_levels(plane: np.ndarray, params: RdoParams):
    """Bottom-up DP over all CTUs of ``plane`` (dims multiples of 64).

    Returns ``(split, cost)`` where ``split[s]`` is a boolean array with one
    entry per s-block (s = 16, 32, 64) and ``cost`` holds the optimal cost of
    each CTU.
    """
    lam = params.lambda_rdo
    leaf_rate = lam * params.leaf_bits
    split_rate = lam * params.split_bits
    sse = _level_sse(plane)
    cost = sse[MIN_CU] + leaf_rate
    split = {}
    for s in CU_SIZES[1:]:
        split_cost = _blocks(cost, 2).sum(axis=(1, 3)) + split_rate
        leaf_cost = sse[s] + leaf_rate
        # Ties keep the larger CU.
        split[s] = split_cost < leaf_cost
        cost = np.where(split[s], split_cost, leaf_cost)
    return split, cost


def _pad_plane(plane: np.ndarray) -> np.ndarray:
    return np.pad(plane, _pad_to(plane.shape, CTU_SIZE), mode="edge")


def ctu_partition(ctu, params: RdoParams = RdoParams()) -> tuple:
    """Optimal quadtree of one 64x64 CTU; returns ``(root QuadNode, cost)``."""
    ctu = np.asarray(ctu)
    if ctu.shape != (CTU_SIZE, CTU_SIZE):
        raise ValueError(f"CTU must be {CTU_SIZE}x{CTU_SIZE}, got {ctu.shape}")
    split, cost = _solve_levels(ctu, params)

    def build(x, y, s):
        if s == MIN_CU or not split[s][y // s, x // s]:
            return QuadNode(x, y, s)
        h = s // 2
        return QuadNode(
            x, y, s,
            (build(x, y, h), build(x + h, y, h), build(x, y + h, h), build(x + h, y + h, h)),
        )

    return build(0, 0, CTU_SIZE), float(cost[0, 0])


def partition_frame(luma, params: RdoParams = RdoParams()) -> PartitionMask:
    """CU-size mask of a whole luma plane (a ``Frame`` is accepted too)."""
    plane = np.asarray(getattr(luma, "luma", luma))
    if plane.ndim != 2 or plane.size == 0:
        raise ValueError("partition_frame needs a non-empty 2-D plane")
    height, width = plane.shape
    split, _ = _solve_levels(_pad_plane(plane), params)

    def up(flags, factor):
        return np.repeat(np.repeat(flags, factor, axis=0), factor, axis=1)

    # One entry per 8x8 cell: the largest unsplit ancestor wins.
    s64, s32, s16 = up(split[64], 8), up(split[32], 4), up(split[16], 2)
    cells = np.where(~s64, 64, np.where(~s32, 32, np.where(~s16, 16, 8))).astype(np.uint8)
    sizes = up(cells, MIN_CU)[:height, :width]
    return PartitionMask(sizes)
