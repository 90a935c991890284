"""Viewport geometry on the equirectangular tile grid."""
from __future__ import annotations

import numpy as np

CORE, SURROUND, OUTSIDE = "core", "surround", "outside"
AREAS = (CORE, SURROUND, OUTSIDE)

DEFAULT_FOV = 100.0
DEFAULT_MARGIN = 30.0


def _overlaps(lo, hi, cell_lo, cell_hi):
    return np.maximum(lo, cell_lo) < np.minimum(hi, cell_hi)


def window_cells(yaw: float, pitch: float, extent: float, rows: int = 12, cols: int = 24) -> np.ndarray:
    """Boolean ``(rows, cols)`` mask of basic tiles meeting an extent x extent window.

    Yaw wraps around the left/right frame edge; pitch is clipped at the poles.
    Touching a tile boundary without overlapping it does not count.
    """
    cw = 360.0 / cols
    rh = 180.0 / rows
    if extent >= 360.0:
        col_hit = np.ones(cols, dtype=bool)
    else:
        lo, hi = yaw - extent / 2.0, yaw + extent / 2.0
        c_lo = -180.0 + cw * np.arange(cols)
        col_hit = np.zeros(cols, dtype=bool)
        for shift in (-360.0, 0.0, 360.0):
            col_hit |= _overlaps(lo, hi, c_lo + shift, c_lo + cw + shift)
    p_lo, p_hi = max(pitch - extent / 2.0, -90.0), min(pitch + extent / 2.0, 90.0)
    r_hi = 90.0 - rh * np.arange(rows)
    row_hit = _overlaps(p_lo, p_hi, r_hi - rh, r_hi)
    return row_hit[:, None] & col_hit[None, :]


def _rect_hits(idx, n, mask):
    return np.bincount(idx, weights=mask.ravel(), minlength=n) > 0


def classify_areas(layout, viewpoint, fov: float = DEFAULT_FOV, margin: float = DEFAULT_MARGIN,
                   cell_idx=None) -> list:
    """Label each rect of the layout core, surround or outside.

    ``cell_idx`` may pass a precomputed ``layout.cell_index()``.
    """
    idx = (layout.cell_index() if cell_idx is None else cell_idx).ravel()
    n = len(layout.rects)
    core_mask = window_cells(viewpoint.yaw, viewpoint.pitch, fov, layout.rows, layout.cols)
    sur_mask = window_cells(viewpoint.yaw, viewpoint.pitch, fov + 2.0 * margin, layout.rows, layout.cols)
    core = _rect_hits(idx, n, core_mask)
    sur = _rect_hits(idx, n, sur_mask)
    return [CORE if c else SURROUND if s else OUTSIDE for c, s in zip(core, sur)]
