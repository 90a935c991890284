"""Distortion-tolerance thresholds from relative velocity and relative depth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flowfield import InputError

# A static pixel at the viewpoint's depth tolerates 3 grey levels.
DEFAULT_LAMBDA = 3.0 / 96.0


@dataclass(frozen=True)
class JndConfig:
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if not self.lam > 0:
            raise InputError("lambda must be > 0")


def _nonneg(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite and >= 0")
    return arr


def sjnd(dv):
    """Velocity threshold ``2.047 * dv**0.634 + 8``."""
    dv = _nonneg(dv, "relative velocity")
    out = 2.047 * dv ** 0.634 + 8.0
    return float(out) if out.ndim == 0 else out


def djnd(dd):
    """Depth threshold, piecewise linear with a knee at ``dd = 1``."""
    dd = _nonneg(dd, "relative depth")
    out = np.where(dd < 1.0, 9.0 * dd + 12.0, 29.0 * dd - 8.0)
    return float(out) if out.ndim == 0 else out


def joint_jnd(dv_map, dd_map, cfg: JndConfig = JndConfig()) -> np.ndarray:
    dv_map = np.asarray(dv_map, dtype=np.float64)
    dd_map = np.asarray(dd_map, dtype=np.float64)
    if dv_map.shape != dd_map.shape:
        raise InputError(f"map shapes differ: {dv_map.shape} vs {dd_map.shape}")
    return cfg.lam * np.asarray(sjnd(dv_map)) * np.asarray(djnd(dd_map))
