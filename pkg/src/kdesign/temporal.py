"""Evolution-time sampling, the sinc^2 time filter, and spectral leakage."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidDimensionError

_TAYLOR_CUTOFF = 1e-4


class Distribution(str, Enum):
    UNIFORM = "uniform"


@dataclass(frozen=True)
class TimeWindow:
    """Evolution times drawn from ``distribution`` on ``[0, T]``."""

    T: float
    distribution: Distribution = Distribution.UNIFORM

    def __post_init__(self):
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ValueError(f"T must be positive and finite, got {self.T}")
        object.__setattr__(self, "distribution", Distribution(self.distribution))


@dataclass(frozen=True)
class LeakageReport:
    T: float
    epsilon: float
    dim: int


def sample_times(window: TimeWindow, count: int, rng: np.random.Generator) -> np.ndarray:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return rng.uniform(0.0, window.T, size=count)


def filter_value(delta_e, window: TimeWindow):
    """I_T(dE) = sinc^2(dE T / 2), equal to 1 at dE = 0.

    Below |dE T / 2| = 1e-4 the fourth-order Taylor series is used instead of
    the ratio, which loses digits there. Accepts scalars or arrays.
    """
    x = 0.5 * np.asarray(delta_e, dtype=float) * window.T
    small = np.abs(x) < _TAYLOR_CUTOFF
    safe = np.where(small, 1.0, x)
    ratio = (np.sin(safe) / safe) ** 2
    x2 = x * x
    series = 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 45.0
    out = np.where(small, series, ratio)
    return float(out) if out.ndim == 0 else out


def epsilon_h(spectrum, window: TimeWindow) -> LeakageReport:
    """Mean filter weight over all ordered pairs of distinct levels."""
    e = np.asarray(spectrum, dtype=float)
    D = e.size
    if D < 2:
        raise InvalidDimensionError("epsilon_h needs at least two levels")
    weights = filter_value(e[:, None] - e[None, :], window)
    off = float(np.sum(weights) - np.trace(weights))
    eps = min(max(off / (D * (D - 1)), 0.0), 1.0)
    return LeakageReport(window.T, eps, D)


def heisenberg_time(spectrum) -> float:
    """D / spectral width: the T beyond which the filter resolves single levels.

    A diagnostic scale only; no routine switches behaviour on it.
    """
    e = np.asarray(spectrum, dtype=float)
    width = float(e.max() - e.min())
    return np.inf if width == 0 else e.size / width
