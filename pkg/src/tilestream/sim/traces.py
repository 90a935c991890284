"""Bandwidth and viewpoint traces: fluid download model and head-motion prediction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..flowfield import InputError, ViewpointSample


class StallError(RuntimeError):
    """Download can never finish: the trace ends at zero throughput."""


@dataclass
class BandwidthTrace:
    """Piecewise-constant throughput: ``bps[i]`` holds on ``[t[i], t[i+1])``.

    The last sample's rate extends past the end of the trace.
    """

    t: np.ndarray
    bps: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.bps = np.asarray(self.bps, dtype=np.float64)
        if self.t.shape != self.bps.shape or self.t.size < 2:
            raise InputError("a bandwidth trace needs at least two (t, throughput) samples")
        if np.any(np.diff(self.t) <= 0):
            raise InputError("trace timestamps must increase strictly")
        if np.any(self.bps < 0):
            raise InputError("throughput must be >= 0")
        self._cum = np.concatenate([[0.0], np.cumsum(self.bps[:-1] * np.diff(self.t))])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def mean(self) -> float:
        """Time-weighted mean over ``[t[0], t[-1]]``."""
        return float(self._cum[-1] / self.duration)

    def bits_until(self, t: float) -> float:
        """Bits delivered from ``t[0]`` to ``t``."""
        if t < self.t[0]:
            raise InputError(f"time {t} precedes the trace")
        i = int(np.searchsorted(self.t, t, side="right")) - 1
        return float(self._cum[i] + self.bps[i] * (t - self.t[i]))

    def integrate(self, a: float, b: float) -> float:
        return self.bits_until(b) - self.bits_until(a)

    def shifted(self, offset: float) -> "BandwidthTrace":
        """Same trace with time re-origined so ``offset`` becomes 0."""
        keep = self.t > offset
        t = np.concatenate([[offset], self.t[keep]]) - offset
        i = int(np.searchsorted(self.t, offset, side="right")) - 1
        bps = np.concatenate([[self.bps[i]], self.bps[keep]])
        if t.size < 2:
            t, bps = np.array([0.0, 1.0]), np.array([bps[0], bps[0]])
        return BandwidthTrace(t, bps)


def download_time(nbytes: float, trace: BandwidthTrace, t_start: float) -> float:
    """Seconds needed from ``t_start`` to move ``nbytes`` over the trace."""
    if nbytes < 0:
        raise InputError("byte count must be >= 0")
    if nbytes == 0:
        return 0.0
    target = trace.bits_until(t_start) + 8.0 * nbytes
    cum = trace._cum
    if target > cum[-1]:
        rate = trace.bps[-1]
        if rate <= 0:
            raise StallError("trace ends at zero throughput with data outstanding")
        return float(trace.t[-1] + (target - cum[-1]) / rate - t_start)
    i = int(np.searchsorted(cum, target, side="left"))
    t_end = trace.t[i - 1] + (target - cum[i - 1]) / trace.bps[i - 1]
    return float(max(t_end - t_start, 0.0))


@dataclass
class ViewpointTrace:
    t: np.ndarray
    yaw: np.ndarray
    pitch: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.yaw = np.asarray(self.yaw, dtype=np.float64)
        self.pitch = np.asarray(self.pitch, dtype=np.float64)
        if not (self.t.shape == self.yaw.shape == self.pitch.shape) or self.t.size == 0:
            raise InputError("viewpoint trace columns must be non-empty and equal length")
        if np.any(np.diff(self.t) < 0):
            raise InputError("viewpoint timestamps must not decrease")
        if np.any(self.yaw < -180) or np.any(self.yaw >= 180) or np.any(np.abs(self.pitch) > 90):
            raise InputError("viewpoint angles out of range")
        self._yaw_u = np.rad2deg(np.unwrap(np.deg2rad(self.yaw)))

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def sample_at(self, t: float) -> ViewpointSample:
        """Linear interpolation, taking the short way around in yaw."""
        y = float(np.interp(t, self.t, self._yaw_u))
        p = float(np.interp(t, self.t, self.pitch))
        return ViewpointSample(t, wrap_yaw(y), p)


def wrap_yaw(yaw: float) -> float:
    return float((yaw + 180.0) % 360.0 - 180.0)


def predict_viewpoint(trace: ViewpointTrace, t_now: float, horizon: float, window: int = 8) -> ViewpointSample:
    """Least-squares linear extrapolation of the last ``window`` samples.

    With fewer than two samples at or before ``t_now`` the latest available
    sample is returned unchanged.
    """
    n = int(np.searchsorted(trace.t, t_now, side="right"))
    if n < 2:
        i = max(n - 1, 0)
        return ViewpointSample(float(t_now + horizon), float(trace.yaw[i]), float(trace.pitch[i]))
    lo = max(0, n - window)
    ts = trace.t[lo:n]
    yaw = np.rad2deg(np.unwrap(np.deg2rad(trace.yaw[lo:n])))
    pitch = trace.pitch[lo:n]
    t_target = t_now + horizon
    if np.ptp(ts) == 0:
        return ViewpointSample(float(t_target), float(trace.yaw[n - 1]), float(trace.pitch[n - 1]))
    A = np.stack([np.ones_like(ts), ts - ts[-1]], axis=1)
    cy = np.linalg.lstsq(A, yaw, rcond=None)[0]
    cp = np.linalg.lstsq(A, pitch, rcond=None)[0]
    dt = t_target - ts[-1]
    y = cy[0] + cy[1] * dt
    p = float(np.clip(cp[0] + cp[1] * dt, -90.0, 90.0))
    return ViewpointSample(float(t_target), wrap_yaw(y), p)
