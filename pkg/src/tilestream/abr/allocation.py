"""Per-area tile quality selection by multiple-choice knapsack DP."""
from __future__ import annotations

import math

import numpy as np

from .areas import AREAS

MAX_UNITS = 2048


def rect_table(cell_values: np.ndarray, cell_sizes: np.ndarray, layout):
    """Sum per-cell values and sizes into per-rect ``(n_rects, levels)`` tables."""
    idx = layout.cell_index().ravel()
    n = len(layout.rects)
    L = cell_values.shape[-1]
    vals = np.zeros((n, L))
    sizes = np.zeros((n, L), dtype=np.int64)
    np.add.at(vals, idx, cell_values.reshape(-1, L))
    np.add.at(sizes, idx, np.asarray(cell_sizes).reshape(-1, L).astype(np.int64))
    return vals, sizes


def knapsack(values, costs, budget, max_units: int = MAX_UNITS) -> np.ndarray:
    """Pick one level per item maximizing total value with total cost <= budget.

    Exact for integer costs whose all-top total fits in ``max_units``;
    larger instances are solved on a coarser cost unit with costs rounded
    up (always feasible), then compared against the best uniform level.
    Returns all zeros when nothing fits.
    """
    values = np.asarray(values, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.float64)
    n, L = values.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    budget = max(float(budget), 0.0)
    total = float(costs.max(axis=1).sum())
    unit = max(1.0, math.ceil(total / max_units))
    cu = np.ceil(costs / unit - 1e-12).astype(np.int64)
    B = int(min(math.floor(budget / unit + 1e-12), cu.max(axis=1).sum()))

    # tables[i][b]: best value of the first i items within b units
    tables = [np.zeros(B + 1)]
    for i in range(n):
        prev = tables[-1]
        cur = np.full(B + 1, -np.inf)
        for lvl in range(L):
            c = cu[i, lvl]
            if c <= B:
                np.maximum(cur[c:], prev[:B + 1 - c] + values[i, lvl], out=cur[c:])
        tables.append(cur)
    if not np.isfinite(tables[-1][B]):
        return np.zeros(n, dtype=np.int64)

    # walk back; the same sums are recomputed, so equality is exact and the
    # lowest level wins ties
    levels = np.zeros(n, dtype=np.int64)
    b = B
    for i in range(n - 1, -1, -1):
        prev, target = tables[i], tables[i + 1][b]
        for lvl in range(L):
            c = cu[i, lvl]
            if c <= b and prev[b - c] + values[i, lvl] == target:
                levels[i] = lvl
                b -= c
                break
    best_val = values[np.arange(n), levels].sum()

    if unit > 1:
        for lvl in range(L - 1, -1, -1):
            if costs[:, lvl].sum() <= budget:
                if values[:, lvl].sum() > best_val:
                    levels = np.full(n, lvl, dtype=np.int64)
                break
    return levels


def allocate_tiles(labels, budgets: dict, rect_values, rect_sizes, max_units: int = MAX_UNITS) -> np.ndarray:
    """Independently fill each area's byte budget; returns one level per rect."""
    labels = np.asarray(labels)
    out = np.zeros(len(labels), dtype=np.int64)
    for area in AREAS:
        sel = np.flatnonzero(labels == area)
        if sel.size:
            out[sel] = knapsack(rect_values[sel], rect_sizes[sel], budgets.get(area, 0), max_units)
    return out
