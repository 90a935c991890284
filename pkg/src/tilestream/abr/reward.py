"""Session reward: quality minus rebuffering, outside-miss and switching penalties."""
from __future__ import annotations

from typing import Sequence

from ..flowfield import InputError

REWARD_ALPHA = 33.0
REWARD_BETA = 1.0


def reward(outcomes: Sequence, alpha: float = REWARD_ALPHA, beta: float = REWARD_BETA) -> float:
    """Total reward of a chunk sequence.

    Each outcome needs ``P`` (dB), ``Rt`` (rebuffer s) and ``ratio``.
    """
    if len(outcomes) == 0:
        raise InputError("reward needs at least one chunk")
    total = 0.0
    prev = None
    for o in outcomes:
        total += chunk_reward(o.P, o.Rt, o.ratio, prev, alpha, beta)
        prev = o.P
    return total


def chunk_reward(P, Rt, ratio, prev_P=None, alpha=REWARD_ALPHA, beta=REWARD_BETA) -> float:
    """Per-chunk share of :func:`reward`; the switch penalty is charged to the later chunk."""
    r = P - alpha * Rt - beta * ratio
    if prev_P is not None:
        r -= abs(P - prev_P)
    return float(r)
