"""Block-matching motion estimation and the velocity/depth maps derived from it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRID_ROWS = 12
GRID_COLS = 24


class InputError(ValueError):
    """Raised when an operation receives malformed or inconsistent input."""


@dataclass(frozen=True)
class Frame:
    """Grayscale frame, row-major ``pixels[row, col]``."""

    pixels: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise InputError(f"frame must be 2-D, got shape {px.shape}")
        h, w = px.shape
        if w <= 0 or h <= 0:
            raise InputError("empty frame")
        if w % GRID_COLS or h % GRID_ROWS:
            raise InputError(f"frame {w}x{h} does not tile a {GRID_ROWS}x{GRID_COLS} grid")
        if px.size and (px.min() < 0 or px.max() > self.peak):
            raise InputError("pixel value out of range")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def peak(self) -> int:
        return 2 ** self.bit_depth - 1


@dataclass(frozen=True)
class ViewpointSample:
    t: float
    yaw: float
    pitch: float
    velocity: tuple[float, float] = (0.0, 0.0)


def _as_array(frame) -> np.ndarray:
    return np.asarray(frame.pixels if isinstance(frame, Frame) else frame, dtype=np.float64)


def _block_sums(a: np.ndarray, block: int) -> np.ndarray:
    h, w = a.shape
    rows = np.arange(0, h, block)
    cols = np.arange(0, w, block)
    return np.add.reduceat(np.add.reduceat(a, rows, axis=0), cols, axis=1)


def _candidates(radius: int) -> list[tuple[int, int]]:
    # Ordered so ties resolve toward the smallest displacement.
    cands = [(dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    cands.sort(key=lambda d: (d[0] ** 2 + d[1] ** 2, abs(d[1]), abs(d[0]), d[1], d[0]))
    return cands


def estimate_flow(prev, next, block: int = 16, radius: int = 7) -> np.ndarray:
    """Exhaustive SAD block matching with wrap-around borders.

    Returns an ``(H, W, 2)`` array of ``(dx, dy)`` such that the content at
    ``(row, col)`` in ``prev`` appears at ``(row + dy, col + dx)`` in ``next``.
    Blocks on the right/bottom edge may be partial.
    """
    a = _as_array(prev)
    b = _as_array(next)
    if a.shape != b.shape:
        raise InputError(f"frame dimensions differ: {a.shape} vs {b.shape}")
    if block < 4 or radius < 1:
        raise InputError("block must be >= 4 and radius >= 1")
    h, w = a.shape
    if h < block or w < block:
        raise InputError(f"frame {w}x{h} smaller than one {block}px block")

    best_sad = None
    best = None
    for k, (dx, dy) in enumerate(_candidates(radius)):
        # shifted[y, x] = next[y + dy, x + dx]
        shifted = np.roll(b, shift=(-dy, -dx), axis=(0, 1))
        sad = _block_sums(np.abs(shifted - a), block)
        if best_sad is None:
            best_sad = sad
            best = np.zeros(sad.shape, dtype=np.int64)
        else:
            better = sad < best_sad
            best_sad = np.where(better, sad, best_sad)
            best[better] = k

    cands = np.array(_candidates(radius), dtype=np.float64)
    per_block = cands[best]
    flow = np.repeat(np.repeat(per_block, block, axis=0), block, axis=1)
    return flow[:h, :w]


def relative_velocity_map(flow: np.ndarray, viewpoint_velocity) -> np.ndarray:
    """Magnitude of each pixel's motion relative to the viewpoint's motion."""
    flow = np.asarray(flow, dtype=np.float64)
    v = np.asarray(viewpoint_velocity, dtype=np.float64).reshape(1, 1, 2)
    return np.hypot(*np.moveaxis(flow - v, -1, 0))


def depth_proxy_map(flow: np.ndarray, background_eps: float = 0.5) -> np.ndarray:
    """Normalized flow magnitude with near-static pixels zeroed as background.

    Distant content looks static between consecutive frames, so magnitude
    doubles as a coarse nearness cue.
    """
    if background_eps < 0:
        raise InputError("background_eps must be >= 0")
    mag = np.hypot(*np.moveaxis(np.asarray(flow, dtype=np.float64), -1, 0))
    mag = np.where(mag <= background_eps, 0.0, mag)
    peak = mag.max()
    if peak <= 0:
        return np.zeros_like(mag)
    return mag / peak


def viewpoint_pixel(yaw: float, pitch: float, width: int, height: int) -> tuple[int, int]:
    """Equirectangular (row, col) under a yaw/pitch direction."""
    if not (-180.0 <= yaw < 180.0) or not (-90.0 <= pitch <= 90.0):
        raise InputError(f"viewpoint ({yaw}, {pitch}) outside the frame")
    col = int((yaw + 180.0) / 360.0 * width)
    row = int((90.0 - pitch) / 180.0 * height)
    return min(row, height - 1), min(col, width - 1)


def relative_depth_map(depth: np.ndarray, viewpoint: ViewpointSample, frame_dims=None) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape if frame_dims is None else (frame_dims[1], frame_dims[0])
    if depth.shape != (h, w):
        raise InputError("depth map does not match frame dimensions")
    r, c = viewpoint_pixel(viewpoint.yaw, viewpoint.pitch, w, h)
    return np.abs(depth - depth[r, c])
