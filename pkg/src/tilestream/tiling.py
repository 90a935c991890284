"""Variable-size tiling: greedy rectangular cuts minimizing within-tile variance."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .flowfield import InputError

HORIZONTAL = "horizontal"
VERTICAL = "vertical"

# Gains closer than this are treated as ties so rounding noise in the
# prefix sums cannot override the deterministic tie-break.
GAIN_TOL = 1e-9


@dataclass(frozen=True, order=True)
class TileRect:
    """Inclusive, 1-based row range ``x1..x2`` and column range ``y1..y2``."""

    x1: int
    x2: int
    y1: int
    y2: int

    @property
    def n_rows(self) -> int:
        return self.x2 - self.x1 + 1

    @property
    def n_cols(self) -> int:
        return self.y2 - self.y1 + 1

    @property
    def area(self) -> int:
        return self.n_rows * self.n_cols

    def slices(self) -> tuple[slice, slice]:
        return slice(self.x1 - 1, self.x2), slice(self.y1 - 1, self.y2)

    def cells(self):
        for r in range(self.x1 - 1, self.x2):
            for c in range(self.y1 - 1, self.y2):
                yield r, c


@dataclass
class TileLayout:
    rects: list
    K: int
    rows: int = 12
    cols: int = 24

    def cell_index(self) -> np.ndarray:
        """``(rows, cols)`` array mapping each basic tile to its rect index."""
        idx = np.full((self.rows, self.cols), -1, dtype=np.int64)
        for i, r in enumerate(self.rects):
            idx[r.slices()] = i
        return idx

    def validate(self):
        cover = np.zeros((self.rows, self.cols), dtype=np.int64)
        for r in self.rects:
            if not (1 <= r.x1 <= r.x2 <= self.rows and 1 <= r.y1 <= r.y2 <= self.cols):
                raise InputError(f"{r} outside the {self.rows}x{self.cols} grid")
            cover[r.slices()] += 1
        if not np.all(cover == 1):
            raise InputError("rects do not partition the grid")


def full_rect(rows: int, cols: int) -> TileRect:
    return TileRect(1, rows, 1, cols)


class _Prefix:
    """2-D prefix sums of E and E**2 for O(1) rect statistics."""

    def __init__(self, E: np.ndarray):
        E = np.asarray(E, dtype=np.float64)
        self.shape = E.shape
        self.s1 = np.zeros((E.shape[0] + 1, E.shape[1] + 1))
        self.s2 = np.zeros_like(self.s1)
        self.s1[1:, 1:] = E.cumsum(0).cumsum(1)
        self.s2[1:, 1:] = (E * E).cumsum(0).cumsum(1)

    def _box(self, s, r):
        return s[r.x2, r.y2] - s[r.x1 - 1, r.y2] - s[r.x2, r.y1 - 1] + s[r.x1 - 1, r.y1 - 1]

    def sse(self, r: TileRect) -> float:
        n = r.area
        if n == 1:
            return 0.0
        s = self._box(self.s1, r)
        return max(self._box(self.s2, r) - s * s / n, 0.0)


def rect_variance(rect: TileRect, E) -> float:
    """Population variance of E over the rect, times its cell count."""
    vals = np.asarray(E, dtype=np.float64)[rect.slices()]
    if vals.size <= 1:
        return 0.0
    return float(vals.var() * vals.size)


class Cut(NamedTuple):
    direction: str
    position: int
    gain: float


def split(rect: TileRect, direction: str, position: int) -> tuple[TileRect, TileRect]:
    if direction == HORIZONTAL:
        return TileRect(rect.x1, position, rect.y1, rect.y2), TileRect(position + 1, rect.x2, rect.y1, rect.y2)
    return TileRect(rect.x1, rect.x2, rect.y1, position), TileRect(rect.x1, rect.x2, position + 1, rect.y2)


def _enumerate_cuts(rect: TileRect):
    for p in range(rect.x1, rect.x2):
        yield HORIZONTAL, p
    for p in range(rect.y1, rect.y2):
        yield VERTICAL, p


def _best_cut(rect: TileRect, prefix: _Prefix) -> Optional[Cut]:
    parent = prefix.sse(rect)
    best = None
    for direction, pos in _enumerate_cuts(rect):
        a, b = split(rect, direction, pos)
        gain = parent - prefix.sse(a) - prefix.sse(b)
        # enumeration order already is horizontal-first, smallest position
        if best is None or gain > best.gain + GAIN_TOL:
            best = Cut(direction, pos, gain)
    return best


def get_best_cut(rect: TileRect, E) -> Optional[Cut]:
    """Best single cut of ``rect``, or None for a 1x1 rect.

    Ties go to horizontal cuts, then to the smaller position.
    """
    return _best_cut(rect, _Prefix(E))


def build_layout(E, K: int = 50) -> TileLayout:
    """Apply K-1 cuts, each the best available over all current rects.

    Ties between rects break on direction, then position, then the rect's
    top-left corner.
    """
    E = np.asarray(E, dtype=np.float64)
    rows, cols = E.shape
    if not 1 <= K <= rows * cols:
        raise InputError(f"K must be in 1..{rows * cols}, got {K}")
    prefix = _Prefix(E)
    heap = []

    def push(rect):
        cut = _best_cut(rect, prefix)
        if cut is not None:
            # quantize the gain so near-equal gains compare on the tie-break
            key = (-round(cut.gain / GAIN_TOL) * GAIN_TOL, cut.direction != HORIZONTAL,
                   cut.position, rect.x1, rect.y1)
            heapq.heappush(heap, (key, rect, cut))

    leaves = {full_rect(rows, cols)}
    push(full_rect(rows, cols))
    while len(leaves) < K:
        _, rect, cut = heapq.heappop(heap)
        a, b = split(rect, cut.direction, cut.position)
        leaves.remove(rect)
        leaves.update((a, b))
        push(a)
        push(b)
    rects = sorted(leaves, key=lambda r: (r.x1, r.y1))
    return TileLayout(rects=rects, K=K, rows=rows, cols=cols)


def total_variance(layout: TileLayout, E) -> float:
    return sum(rect_variance(r, E) for r in layout.rects)


def fixed_grid_layout(rows: int = 12, cols: int = 24) -> TileLayout:
    rects = [TileRect(r, r, c, c) for r in range(1, rows + 1) for c in range(1, cols + 1)]
    return TileLayout(rects=rects, K=rows * cols, rows=rows, cols=cols)
