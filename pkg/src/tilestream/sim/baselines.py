"""Reference controllers: uniform rate heuristic, fixed-grid area heuristic, random, RL."""
from __future__ import annotations

import numpy as np

from ..abr.a2c import greedy_action, sample_action
from ..abr.state import N_LEVELS, Action
from ..manifest import FIXED, VERSATILE


def _byte_budget(state, view):
    """Bytes affordable at the last measured rate; None before any download."""
    if not np.any(state.tau_hist):
        return None
    return state.rate * view.chunk_duration / 8.0


def baseline_rate(state, view) -> Action:
    """Highest uniform level whose whole-frame cost fits the last measured rate.

    The first chunk, with no measurement yet, goes out at the lowest
    non-blank level.
    """
    budget = _byte_budget(state, view)
    if budget is None:
        return Action(1, 1, 1)
    frame_cost = view.area_costs.sum(axis=0)
    fits = np.flatnonzero(frame_cost <= budget)
    lvl = int(fits.max()) if fits.size else 0
    return Action(lvl, lvl, lvl)


def baseline_fixed_grid(state, view) -> Action:
    """Viewport-first greedy: best core level, then surround, then outside.

    Levels are kept non-increasing away from the viewport and the total must
    fit the last measured rate.
    """
    budget = _byte_budget(state, view)
    if budget is None:
        return Action(1, 1, 1)
    c = view.area_costs
    best = Action(0, 0, 0)
    for core in range(N_LEVELS):
        for sur in range(core + 1):
            for out in range(sur + 1):
                if c[0, core] + c[1, sur] + c[2, out] <= budget:
                    best = max(best, Action(core, sur, out), key=lambda a: (a.core, a.surround, a.outside))
    return best


class RateController:
    scheme = VERSATILE
    name = "rate"

    def __call__(self, state, view):
        return baseline_rate(state, view)


class FixedGridController:
    """Fixed 12x24 tiles scored with plain PSNR."""

    scheme = FIXED
    name = "fixed_grid"

    def __call__(self, state, view):
        return baseline_fixed_grid(state, view)


class RandomController:
    scheme = VERSATILE
    name = "random"

    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)

    def __call__(self, state, view):
        return Action.from_index(int(self.rng.integers(N_LEVELS ** 3)))


class RLController:
    scheme = VERSATILE
    name = "rl"

    def __init__(self, params, greedy=True, seed=0):
        self.params = params
        self.greedy = greedy
        self.rng = np.random.default_rng(seed)

    def __call__(self, state, view):
        if self.greedy:
            return Action.from_index(greedy_action(self.params, state))
        return Action.from_index(sample_action(self.params, state, self.rng))
