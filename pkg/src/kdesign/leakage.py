"""Finite-T error curves, power-law fits, threshold times, and the 2SP/3SP separation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, InsufficientSignalError, NoCrossingError
from .frame_potential import (
    FpEstimate,
    Protocol,
    ProtocolConfig,
    fp_monte_carlo,
    fp_perfect_phase_multi,
)
from .hamiltonians import sample_gue
from .rng import derive_seed
from .spectral import eigendecompose
from .temporal import TimeWindow, heisenberg_time

SIGNAL_SIGMAS = 3.0
AUTO_SIGNAL_SIGMAS = 5.0
AUTO_HEISENBERG_FACTOR = 3.0


@dataclass(frozen=True)
class CurvePoint:
    T: float
    fp_mean: float
    fp_stderr: float
    delta: float

    def relative_stderr(self, oracle: float, oracle_stderr: float = 0.0) -> float:
        """Standard error of ``delta`` (oracle uncertainty added in quadrature)."""
        ratio = self.fp_mean / oracle
        return math.hypot(self.fp_stderr / oracle, ratio * oracle_stderr / oracle)


@dataclass(frozen=True)
class ErrorCurve:
    """|F(T) / F_perfect - 1| on a T grid."""

    protocol: Protocol
    k: int
    D: int
    points: tuple[CurvePoint, ...]
    F_perfect: float
    F_perfect_stderr: float = 0.0

    def __post_init__(self):
        ts = [p.T for p in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("T grid must be strictly increasing")

    @property
    def T(self) -> np.ndarray:
        return np.array([p.T for p in self.points])

    @property
    def delta(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])

    @property
    def delta_stderr(self) -> np.ndarray:
        return np.array([p.relative_stderr(self.F_perfect, self.F_perfect_stderr)
                         for p in self.points])


def log_grid(T_min: float, T_max: float, per_decade: int = 8) -> np.ndarray:
    """Logarithmic T grid including both ends."""
    if not (0 < T_min < T_max):
        raise ConfigError(f"need 0 < T_min < T_max, got {T_min}, {T_max}")
    n = int(round(math.log10(T_max / T_min) * per_decade)) + 1
    return np.logspace(math.log10(T_min), math.log10(T_max), max(n, 2))


def error_curve(config: ProtocolConfig, T_grid: Sequence[float], oracle: float,
                oracle_stderr: float = 0.0, threads: int | None = None) -> ErrorCurve:
    """Run finite-T Monte Carlo at every grid T and compare with ``oracle``.

    Point ``i`` uses the seed ``derive_seed(config.seed, "grid", i)`` so noise
    is independent between grid points.
    """
    grid = [float(t) for t in T_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("T grid must be sorted ascending without repeats")
    if not oracle > 0:
        raise ConfigError(f"oracle must be positive, got {oracle}")
    points = []
    for i, T in enumerate(grid):
        cfg = replace(config, window=TimeWindow(T), seed=derive_seed(config.seed, "grid", i))
        est = fp_monte_carlo(cfg, threads=threads)
        points.append(CurvePoint(T, est.mean, est.stderr, abs(est.mean / oracle - 1.0)))
    return ErrorCurve(config.kind, config.k, config.dim, tuple(points), float(oracle),
                      float(oracle_stderr))


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    slope_err: float
    intercept: float
    T_used: tuple[float, ...]


def _weighted_line(x: np.ndarray, y: np.ndarray, sigma: np.ndarray | None):
    if sigma is None or np.any(sigma <= 0):
        w = np.ones_like(x)
        scaled = False
    else:
        w = 1.0 / sigma**2
        scaled = True
    sw, swx, swy = w.sum(), (w * x).sum(), (w * y).sum()
    swxx, swxy = (w * x * x).sum(), (w * x * y).sum()
    det = sw * swxx - swx**2
    slope = (sw * swxy - swx * swy) / det
    intercept = (swxx * swy - swx * swxy) / det
    if scaled:
        var = sw / det
    else:
        resid = y - (slope * x + intercept)
        dof = max(len(x) - 2, 1)
        var = (resid @ resid / dof) * len(x) / det
    return slope, math.sqrt(max(var, 0.0)), intercept


def loglog_fit(x, y, sigma_log=None) -> tuple[float, float, float]:
    """Slope, slope error and intercept of log(y) against log(x).

    ``sigma_log`` are standard errors of log(y); without them the slope error
    comes from the residual scatter.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise InsufficientSignalError("log-log fit needs >= 2 positive points")
    sigma = None if sigma_log is None else np.asarray(sigma_log, dtype=float)
    slope, err, intercept = _weighted_line(np.log(x), np.log(y), sigma)
    return float(slope), float(err), float(intercept)


def fit_power_law(curve: ErrorCurve, T_min: float = 0.0, T_max: float = math.inf,
                  min_sigmas: float = SIGNAL_SIGMAS) -> PowerLawFit:
    """Weighted least-squares slope of log(delta) against log(T).

    Only points inside [T_min, T_max] with delta above ``min_sigmas`` standard
    errors are used; the weight of a point is 1 / var(log delta) from the
    delta method. With zero standard errors the fit is unweighted.
    """
    T, d, s = curve.T, curve.delta, curve.delta_stderr
    keep = (T >= T_min) & (T <= T_max) & (d > 0) & (d > min_sigmas * s)
    if keep.sum() < 4:
        raise InsufficientSignalError(
            f"only {int(keep.sum())} points above {min_sigmas:g} sigma in [{T_min:g}, {T_max:g}]"
        )
    sigma = s[keep] / d[keep] if np.all(s[keep] > 0) else None
    slope, err, intercept = loglog_fit(T[keep], d[keep], sigma)
    return PowerLawFit(slope, err, intercept, tuple(T[keep].tolist()))


def auto_fit_window(curve: ErrorCurve, spectrum) -> tuple[float, float]:
    """Pre-saturation window: T above 3x the Heisenberg diagnostic, up to the
    last point still 5 standard errors above zero."""
    t_lo = AUTO_HEISENBERG_FACTOR * heisenberg_time(spectrum)
    strong = curve.T[(curve.delta > AUTO_SIGNAL_SIGMAS * curve.delta_stderr) & (curve.T >= t_lo)]
    if strong.size == 0:
        raise InsufficientSignalError("no point above the 5-sigma signal floor")
    return t_lo, float(strong.max())


def fit_power_law_auto(curve: ErrorCurve, spectrum) -> PowerLawFit:
    t_lo, t_hi = auto_fit_window(curve, spectrum)
    return fit_power_law(curve, t_lo, t_hi, min_sigmas=AUTO_SIGNAL_SIGMAS)


def t_star(curve: ErrorCurve, gamma: float = 0.1, interpolate: bool = False) -> float:
    """Smallest grid T with delta < gamma.

    With ``interpolate`` the crossing is placed by log-log interpolation
    between the bracketing grid points.
    """
    for i, p in enumerate(curve.points):
        if p.delta < gamma:
            if not interpolate or i == 0:
                return p.T
            prev = curve.points[i - 1]
            if prev.delta <= 0 or p.delta <= 0:
                return p.T
            frac = math.log(prev.delta / gamma) / math.log(prev.delta / p.delta)
            return math.exp(math.log(prev.T) + frac * math.log(p.T / prev.T))
    raise NoCrossingError(f"delta never drops below {gamma} on the grid")


@dataclass(frozen=True)
class SeparationRow:
    D: int
    delta_2sp: float
    delta_2sp_err: float
    delta_3sp: float
    delta_3sp_err: float
    ratio: float
    ratio_err: float
    noise_dominated: bool


def delta_at(config: ProtocolConfig, T: float, oracle: FpEstimate,
             threads: int | None = None) -> tuple[float, float]:
    """Signed relative deviation F(T)/F_perfect - 1 and its standard error."""
    est = fp_monte_carlo(replace(config, window=TimeWindow(T)), threads=threads)
    ratio = est.mean / oracle.mean
    err = math.hypot(est.stderr / oracle.mean, ratio * oracle.stderr / oracle.mean)
    return ratio - 1.0, err


def separation_ratio(D_list: Sequence[int], k: int, T: float, samples: int = 20_000,
                     oracle_samples: int | None = None, seed: int = 0,
                     threads: int | None = None) -> list[SeparationRow]:
    """2SP-to-3SP error ratio at fixed (T, k) for GUE Hamiltonians of each D.

    Both protocols share H_1 and H_2. Each delta is measured against the
    random-phase perfect-filter estimate for the same eigensystems, so only
    the finite-T part enters. Rows whose deltas are not 3 standard errors
    above zero are flagged ``noise_dominated``.
    """
    rows = []
    for D in D_list:
        eigs = [eigendecompose(sample_gue(D, derive_seed(seed, "D", D, "realization", l)))
                for l in range(3)]
        out = []
        for kind, es in ((Protocol.TWO_STEP, eigs[:2]), (Protocol.THREE_STEP, eigs)):
            cfg = ProtocolConfig(kind, es, None, k=k, samples=samples,
                                 seed=derive_seed(seed, "D", D, kind.value))
            orc_cfg = replace(cfg, samples=oracle_samples or 4 * samples,
                              seed=derive_seed(seed, "D", D, kind.value, "oracle"))
            oracle = fp_perfect_phase_multi(orc_cfg, [k], threads)[k]
            out.append(delta_at(cfg, T, oracle, threads))
        (d2, e2), (d3, e3) = out
        noisy = not (d2 > SIGNAL_SIGMAS * e2 and d3 > SIGNAL_SIGMAS * e3)
        ratio = d2 / d3 if d3 != 0 else math.inf
        ratio_err = abs(ratio) * math.hypot(e2 / d2, e3 / d3) if d2 and d3 else math.inf
        rows.append(SeparationRow(D, d2, e2, d3, e3, ratio, ratio_err, noisy))
    return rows
