"""Controller observation and the 6x6x6 action encoding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..flowfield import InputError

HISTORY = 8
N_LEVELS = 6
N_ACTIONS = N_LEVELS ** 3

# Fixed input scales so every feature is O(1) for the network.
P_SCALE = 100.0
TAU_SCALE = 4.0
BITRATE_SCALE = 5e6
BUF_SCALE = 8.0


def _zeros():
    return np.zeros(HISTORY)


@dataclass
class AbrState:
    P_hist: np.ndarray = field(default_factory=_zeros)
    tau_hist: np.ndarray = field(default_factory=_zeros)
    co_hist: np.ndarray = field(default_factory=_zeros)
    su_hist: np.ndarray = field(default_factory=_zeros)
    out_hist: np.ndarray = field(default_factory=_zeros)
    buf: float = 0.0
    rate: float = 0.0
    ratio: float = 0.0
    acc_out: float = 0.0

    def histories(self) -> np.ndarray:
        return np.stack([self.P_hist, self.tau_hist, self.co_hist, self.su_hist, self.out_hist])

    def validate(self):
        h = self.histories()
        scalars = np.array([self.buf, self.rate, self.ratio, self.acc_out])
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(scalars))):
            raise InputError("state has non-finite entries")
        if h.shape[1] != len(self.P_hist) or self.buf < 0 or not 0 <= self.ratio <= 1:
            raise InputError("state out of range")

    def features(self) -> tuple[np.ndarray, np.ndarray]:
        """Scaled ``(5, m)`` history block and ``(4,)`` scalar block."""
        self.validate()
        h = self.histories() / np.array([[P_SCALE], [TAU_SCALE], [BITRATE_SCALE], [BITRATE_SCALE], [BITRATE_SCALE]])
        s = np.array([self.buf / BUF_SCALE, self.rate / BITRATE_SCALE, self.ratio, self.acc_out])
        return h, s

    def push(self, P, tau, co, su, out, buf, rate, ratio, acc_out) -> "AbrState":
        roll = lambda v, x: np.append(v[1:], x)
        return AbrState(roll(self.P_hist, P), roll(self.tau_hist, tau), roll(self.co_hist, co),
                        roll(self.su_hist, su), roll(self.out_hist, out), buf, rate, ratio, acc_out)


@dataclass(frozen=True)
class Action:
    core: int
    surround: int
    outside: int

    def __post_init__(self):
        for lvl in (self.core, self.surround, self.outside):
            if not 0 <= lvl < N_LEVELS:
                raise InputError(f"level {lvl} not on the ladder")

    @property
    def index(self) -> int:
        return (self.core * N_LEVELS + self.surround) * N_LEVELS + self.outside

    @classmethod
    def from_index(cls, idx: int) -> "Action":
        if not 0 <= idx < N_ACTIONS:
            raise InputError(f"action index {idx} out of range")
        return cls(idx // (N_LEVELS * N_LEVELS), (idx // N_LEVELS) % N_LEVELS, idx % N_LEVELS)

    def levels(self) -> dict:
        return {"core": self.core, "surround": self.surround, "outside": self.outside}


def batch_features(states) -> tuple[np.ndarray, np.ndarray]:
    hs, ss = zip(*(s.features() for s in states))
    return np.stack(hs), np.stack(ss)
