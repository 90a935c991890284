"""JND-masked PSNR (PSNR-OF), per-tile scoring and efficiency."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .flowfield import GRID_COLS, GRID_ROWS, Frame, InputError

DEFAULT_CAP_DB = 100.0


@dataclass(frozen=True)
class QualityLadder:
    """Level 0 is blank; higher index means better visual quality."""

    levels: tuple = ("blank", "qp40", "qp35", "qp30", "qp25", "qp20")

    def __post_init__(self):
        if len(self.levels) < 2:
            raise InputError("a ladder needs at least two levels")
        if len(set(self.levels)) != len(self.levels):
            raise InputError("ladder level names must be unique")

    def __len__(self):
        return len(self.levels)

    @property
    def top(self) -> int:
        return len(self.levels) - 1


@dataclass
class TileScoreGrid:
    """Per-cell score (dB) and size (bytes) for each ladder level.

    ``scores`` and ``sizes`` have shape ``(rows, cols, levels)``.
    """

    scores: np.ndarray
    sizes: Optional[np.ndarray] = None
    ladder: QualityLadder = field(default_factory=QualityLadder)

    @property
    def rows(self) -> int:
        return self.scores.shape[0]

    @property
    def cols(self) -> int:
        return self.scores.shape[1]

    def validate(self):
        if self.scores.shape[2] != len(self.ladder):
            raise InputError("score grid does not match ladder")
        if np.any(np.diff(self.scores, axis=2) < 0):
            raise InputError("scores must not decrease with quality level")
        if self.sizes is not None:
            if self.sizes.shape != self.scores.shape:
                raise InputError("sizes and scores differ in shape")
            if np.any(self.sizes[..., 0] != 0):
                raise InputError("blank level must have size 0")
            if np.any(np.diff(self.sizes, axis=2) <= 0):
                raise InputError("sizes must increase strictly with quality level")


def _pair(orig, enc, jnd=None):
    if isinstance(orig, Frame):
        peak = orig.peak
    else:
        peak = 255
    a = np.asarray(getattr(orig, "pixels", orig), dtype=np.float64)
    b = np.asarray(getattr(enc, "pixels", enc), dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"frame dimensions differ: {a.shape} vs {b.shape}")
    if jnd is not None:
        jnd = np.broadcast_to(np.asarray(jnd, dtype=np.float64), a.shape) if np.ndim(jnd) == 0 else np.asarray(jnd, dtype=np.float64)
        if jnd.shape != a.shape:
            raise InputError(f"JND map {jnd.shape} does not match frame {a.shape}")
    return a, b, jnd, peak


def visibility_mask(orig, enc, jnd) -> np.ndarray:
    """0 where the error is below threshold, 1 above, 0.5 exactly on it."""
    a, b, jnd, _ = _pair(orig, enc, jnd)
    return (np.sign(np.abs(a - b) - jnd) + 1.0) / 2.0


def _masked_sq(a, b, jnd):
    diff = np.abs(a - b)
    k = (np.sign(diff - jnd) + 1.0) / 2.0
    return (diff * k) ** 2


def mse_of(orig, enc, jnd) -> float:
    a, b, jnd, _ = _pair(orig, enc, jnd)
    return float(_masked_sq(a, b, jnd).mean())


def _to_db(mse, peak, cap_db):
    mse = np.asarray(mse, dtype=np.float64)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(peak / np.sqrt(mse))
    return np.minimum(np.where(mse > 0, db, cap_db), cap_db)


def psnr_of(orig, enc, jnd, cap_db: float = DEFAULT_CAP_DB) -> float:
    if not cap_db > 0:
        raise InputError("cap_db must be > 0")
    a, b, jnd, peak = _pair(orig, enc, jnd)
    return float(_to_db(_masked_sq(a, b, jnd).mean(), peak, cap_db))


def psnr(orig, enc, cap_db: float = DEFAULT_CAP_DB) -> float:
    """Textbook PSNR, capped like :func:`psnr_of`."""
    a, b, _, peak = _pair(orig, enc)
    return float(_to_db(((a - b) ** 2).mean(), peak, cap_db))


def _cell_means(a: np.ndarray, rows: int, cols: int) -> np.ndarray:
    h, w = a.shape
    if h % rows or w % cols:
        raise InputError(f"frame {w}x{h} does not tile a {rows}x{cols} grid")
    return a.reshape(rows, h // rows, cols, w // cols).mean(axis=(1, 3))


def cell_psnr_of(orig, enc, jnd, rows=GRID_ROWS, cols=GRID_COLS, cap_db=DEFAULT_CAP_DB) -> np.ndarray:
    """PSNR-OF restricted to each basic tile, shape ``(rows, cols)``."""
    a, b, jnd, peak = _pair(orig, enc, jnd)
    return _to_db(_cell_means(_masked_sq(a, b, jnd), rows, cols), peak, cap_db)


def tile_scores(orig, enc_per_level: Sequence, jnd, ladder: QualityLadder = QualityLadder(),
                sizes=None, rows=GRID_ROWS, cols=GRID_COLS, cap_db=DEFAULT_CAP_DB) -> TileScoreGrid:
    """Score every basic tile at every non-blank level; blank scores 0 dB.

    Scores are made non-decreasing in level with a running maximum, so an
    encoder artifact that happens to help a low level never ranks it above a
    higher one.
    """
    if len(enc_per_level) != len(ladder) - 1:
        raise InputError(f"expected {len(ladder) - 1} encoded frames, got {len(enc_per_level)}")
    scores = np.zeros((rows, cols, len(ladder)))
    for lvl, enc in enumerate(enc_per_level, start=1):
        scores[..., lvl] = cell_psnr_of(orig, enc, jnd, rows, cols, cap_db)
    scores = np.maximum.accumulate(scores, axis=2)
    return TileScoreGrid(scores=scores, sizes=None if sizes is None else np.asarray(sizes), ladder=ladder)


def efficiency(grid, l_high: int, l_low: int) -> np.ndarray:
    """Mean score gain per ladder step between two levels, per cell."""
    scores = grid.scores if isinstance(grid, TileScoreGrid) else np.asarray(grid)
    if l_high <= l_low:
        raise InputError("l_high must exceed l_low")
    if l_low < 1 or l_high >= scores.shape[-1]:
        raise InputError("efficiency levels must be non-blank and on the ladder")
    return (scores[..., l_high] - scores[..., l_low]) / (l_high - l_low)


def box_blur(a: np.ndarray) -> np.ndarray:
    """3x3 mean filter with edge replication."""
    p = np.pad(a, 1, mode="edge")
    h, w = a.shape
    acc = np.zeros_like(a, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            acc += p[dy:dy + h, dx:dx + w]
    return acc / 9.0


def synthetic_encode(frame, level: int, bit_depth: int = 8) -> np.ndarray:
    """Stand-in encoder: blur passes then uniform quantization.

    Level 5 is the finest (step 4 on 8-bit data) and each level down
    doubles the step. Blur is applied (6 - level) / 2 times; a half pass
    blends the frame 50/50 with its blurred copy.
    """
    if not 1 <= level <= 5:
        raise InputError("synthetic encoder supports levels 1..5")
    a = np.asarray(getattr(frame, "pixels", frame), dtype=np.float64)
    passes, frac = divmod(6 - level, 2)
    for _ in range(passes):
        a = box_blur(a)
    if frac:
        a = 0.5 * (a + box_blur(a))
    step = 2.0 ** (7 - level) * 2.0 ** (bit_depth - 8)
    peak = 2 ** bit_depth - 1
    q = np.floor(a / step) * step + step / 2.0
    return np.clip(np.round(q), 0, peak)
