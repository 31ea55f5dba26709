"""Experiment recipes behind the CLI verbs.

Each recipe returns a :class:`RecipeResult` holding CSV rows, a JSON-ready
summary, and the list of internal checks that decide the exit status.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from math import factorial

import numpy as np

from .combinatorics import (
    all_perms,
    compose,
    derangement,
    fixed_point_weight_sum,
    haar_fp,
    inverse,
    theorem1_value,
)
from .errors import ConfigError, InsufficientSignalError, NoCrossingError
from .frame_potential import (
    PERMSUM_D_MAX,
    PERMSUM_K_MAX,
    Protocol,
    ProtocolConfig,
    fp_monte_carlo,
    fp_monte_carlo_multi,
    fp_perfect_exact_3sp_k1,
    fp_perfect_permsum_2sp,
    fp_perfect_phase,
    fp_perfect_phase_multi,
)
from .hamiltonians import ModelKind, ModelSpec, haar_model
from .io import model_eigensystems
from .leakage import error_curve, fit_power_law_auto, loglog_fit, t_star
from .rng import derive_seed
from .spectral import overlap
from .temporal import TimeWindow, epsilon_h, heisenberg_time
from .weingarten import (
    MONOMIAL_D_MAX,
    MONOMIAL_P_MAX,
    gram_matrix,
    verify_haar_monomial,
    weingarten_table,
)

FP_COLUMNS = ["protocol", "model", "D", "k", "T", "samples", "seed", "fp_mean", "fp_stderr"]
CURVE_COLUMNS = FP_COLUMNS + ["oracle", "delta"]
HEAVY_TAIL_K = 4
DEFAULT_LONG_T = 1e6


class Recipe(str, Enum):
    FP_VS_K = "fp-vs-k"
    ERROR_VS_T = "error-vs-t"
    THEOREM_TABLE = "theorems"
    WEINGARTEN_VERIFY = "weingarten"
    EPSILON_SCALING = "epsilon"
    ORACLE_TRIANGLE = "oracle-triangle"


@dataclass(frozen=True)
class ExperimentConfig:
    recipe: Recipe
    model: ModelSpec | None = None
    protocol: Protocol = Protocol.TWO_STEP
    k_list: tuple[int, ...] = (1,)
    T: float | None = None
    T_grid: tuple[float, ...] | None = None
    samples: int = 10_000
    oracle_samples: int | None = None
    draws: int = 1
    seed: int = 0
    threads: int | None = None
    p: int = 2
    dim_3sp: int = 100
    gamma: float = 0.1
    out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "recipe", Recipe(self.recipe))
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "k_list", tuple(int(k) for k in self.k_list))
        if self.T_grid is not None:
            object.__setattr__(self, "T_grid", tuple(float(t) for t in self.T_grid))

    def validate(self) -> "ExperimentConfig":
        """Raise :class:`ConfigError` naming the missing or bad field."""
        r = self.recipe
        if not self.k_list or min(self.k_list) < 1:
            raise ConfigError("--k needs at least one order k >= 1")
        if self.samples < 1 or self.draws < 1:
            raise ConfigError("--samples and --draws must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if r in (Recipe.FP_VS_K, Recipe.ERROR_VS_T, Recipe.EPSILON_SCALING) and self.model is None:
            raise ConfigError(f"{r.value} needs a model: pass --model and --dim or --sites")
        if self.T is not None and not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"--T must be positive and finite, got {self.T}")
        if r in (Recipe.ERROR_VS_T, Recipe.EPSILON_SCALING):
            if not self.T_grid:
                raise ConfigError(f"{r.value} needs --t-grid, e.g. 1e2:1e6 or 100,1000,10000")
            if any(t <= 0 for t in self.T_grid) or list(self.T_grid) != sorted(set(self.T_grid)):
                raise ConfigError("--t-grid must be positive, ascending, without repeats")
        if r is Recipe.ERROR_VS_T and len(self.k_list) != 1:
            raise ConfigError("error-vs-t takes a single --k")
        if r is Recipe.WEINGARTEN_VERIFY:
            if self.model is None:
                raise ConfigError("weingarten needs --dim")
            if not 1 <= self.p <= 4:
                raise ConfigError(f"--p must be in 1..4, got {self.p}")
        if r is Recipe.ORACLE_TRIANGLE:
            if self.model is None:
                raise ConfigError("oracle-triangle needs --dim")
            if self.model.dim > PERMSUM_D_MAX or max(self.k_list) > PERMSUM_K_MAX:
                raise ConfigError(
                    f"oracle-triangle runs the permutation sum: need --dim <= {PERMSUM_D_MAX}"
                    f" and k <= {PERMSUM_K_MAX}"
                )
            if self.dim_3sp < 0:
                raise ConfigError("--dim-3sp must be >= 0")
        if not 0 < self.gamma < 1:
            raise ConfigError(f"--gamma must lie in (0, 1), got {self.gamma}")
        return self


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class RecipeResult:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def report(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                       for c in self.checks],
            "summary": self.summary,
            "notes": self.notes,
        }


def reference_value(protocol: Protocol, kind: ModelKind, k: int) -> int:
    """Perfect-filter target: k! for 3SP, (k!)^2 for flat 2SP, Theorem 1 otherwise."""
    if protocol is Protocol.THREE_STEP:
        return haar_fp(k)
    if kind is ModelKind.FLAT:
        return factorial(k) ** 2
    return theorem1_value(k)


def _draw_spec(spec: ModelSpec, draws: int, d: int) -> ModelSpec:
    return spec if draws == 1 else replace(spec, seed=derive_seed(spec.seed, "draw", d))


def _combine(values: list, k: int):
    """Mean and stderr across quenched draws (draw scatter included)."""
    if len(values) == 1:
        return values[0][k].mean, values[0][k].stderr
    means = np.array([v[k].mean for v in values])
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(len(means)))


def run_fp_vs_k(cfg: ExperimentConfig) -> RecipeResult:
    """Frame potential for every k in ``cfg.k_list``.

    With ``cfg.T`` the finite-T Monte Carlo is used; without it the
    perfect-filter phase estimator. ``cfg.draws`` > 1 averages over
    independent Hamiltonian draws.
    """
    spec, ks = cfg.model, sorted(set(cfg.k_list))
    result = RecipeResult(FP_COLUMNS + ["oracle", "delta", "draws"])
    per_draw = []
    for d in range(cfg.draws):
        eigs = model_eigensystems(_draw_spec(spec, cfg.draws, d), cfg.protocol.n_hamiltonians)
        pc = ProtocolConfig(cfg.protocol, eigs, None if cfg.T is None else TimeWindow(cfg.T),
                            k=ks[0], samples=cfg.samples, seed=derive_seed(cfg.seed, "fp", d))
        if cfg.T is None:
            per_draw.append(fp_perfect_phase_multi(pc, ks, cfg.threads))
        else:
            per_draw.append(fp_monte_carlo_multi(pc, ks, cfg.threads))
    if cfg.T is not None and max(ks) >= HEAVY_TAIL_K:
        result.notes.append(
            f"k >= {HEAVY_TAIL_K}: |Tr|^(2k) is heavy-tailed and even 1e6 samples may leave"
            " > 10% relative error; the perfect-filter phase estimator (omit --T) is better"
            " suited to T -> infinity targets"
        )
    for k in ks:
        mean, stderr = _combine(per_draw, k)
        oracle = reference_value(cfg.protocol, spec.kind, k)
        result.rows.append({
            "protocol": cfg.protocol.value, "model": spec.kind.value, "D": spec.dim, "k": k,
            "T": math.inf if cfg.T is None else cfg.T, "samples": cfg.samples, "seed": cfg.seed,
            "fp_mean": mean, "fp_stderr": stderr, "oracle": oracle,
            "delta": abs(mean / oracle - 1.0), "draws": cfg.draws,
        })
        bound = haar_fp(k) - 5 * stderr
        result.checks.append(Check(f"haar lower bound k={k}", mean >= bound,
                                   f"mean {mean:.6g} vs k! - 5 stderr = {bound:.6g}"))
    result.summary = {"model": spec.to_dict(), "protocol": cfg.protocol.value}
    return result


def run_error_vs_t(cfg: ExperimentConfig) -> RecipeResult:
    """Finite-T error curve against the perfect-filter oracle, with fit and T*.

    For the flat model at 2SP, k = 1, every point is also compared with the
    exact product [1 + (D-1) eps_1(T)] [1 + (D-1) eps_2(T)].
    """
    spec, k = cfg.model, cfg.k_list[0]
    eigs = model_eigensystems(spec, cfg.protocol.n_hamiltonians)
    pc = ProtocolConfig(cfg.protocol, eigs, None, k=k, samples=cfg.samples,
                        seed=derive_seed(cfg.seed, "curve"))
    flat_closed = spec.kind is ModelKind.FLAT and cfg.protocol is Protocol.TWO_STEP and k == 1
    if flat_closed:
        oracle_mean, oracle_err = 1.0, 0.0
    else:
        orc = fp_perfect_phase(replace(pc, samples=cfg.oracle_samples or cfg.samples,
                                       seed=derive_seed(cfg.seed, "oracle")), cfg.threads)
        oracle_mean, oracle_err = orc.mean, orc.stderr
    curve = error_curve(pc, cfg.T_grid, oracle_mean, oracle_err, cfg.threads)

    columns = CURVE_COLUMNS + (["closed_form"] if flat_closed else [])
    result = RecipeResult(columns)
    for i, pt in enumerate(curve.points):
        row = {
            "protocol": cfg.protocol.value, "model": spec.kind.value, "D": spec.dim, "k": k,
            "T": pt.T, "samples": cfg.samples, "seed": derive_seed(pc.seed, "grid", i),
            "fp_mean": pt.fp_mean, "fp_stderr": pt.fp_stderr, "oracle": oracle_mean,
            "delta": pt.delta,
        }
        if flat_closed:
            window = TimeWindow(pt.T)
            d = spec.dim
            closed = ((1 + (d - 1) * epsilon_h(eigs[0].eigenvalues, window).epsilon)
                      * (1 + (d - 1) * epsilon_h(eigs[1].eigenvalues, window).epsilon))
            row["closed_form"] = closed
            result.checks.append(Check(
                f"flat closed form T={pt.T:.4g}", abs(pt.fp_mean - closed) <= 3 * pt.fp_stderr,
                f"F {pt.fp_mean:.6g} +- {pt.fp_stderr:.2g} vs {closed:.6g}",
            ))
        if cfg.protocol is Protocol.TWO_STEP and k == 1:
            floor = oracle_mean - 3 * math.hypot(pt.fp_stderr, oracle_err)
            result.checks.append(Check(f"leakage nonnegative T={pt.T:.4g}", pt.fp_mean >= floor,
                                       f"F {pt.fp_mean:.6g} vs F(inf) - 3 sigma = {floor:.6g}"))
        result.rows.append(row)

    summary = {
        "model": spec.to_dict(), "protocol": cfg.protocol.value, "k": k,
        "oracle": oracle_mean, "oracle_stderr": oracle_err,
        "heisenberg_time": heisenberg_time(eigs[0].eigenvalues), "gamma": cfg.gamma,
        "slope": None, "slope_err": None, "fit_T": None, "t_star": None,
    }
    try:
        fit = fit_power_law_auto(curve, eigs[0].eigenvalues)
        summary.update(slope=fit.slope, slope_err=fit.slope_err, fit_T=list(fit.T_used))
    except InsufficientSignalError as exc:
        result.notes.append(f"no slope: {exc}")
    try:
        summary["t_star"] = t_star(curve, cfg.gamma)
    except NoCrossingError as exc:
        result.notes.append(f"no T*: {exc}")
    result.summary = summary
    return result


def run_theorem_table(cfg: ExperimentConfig) -> RecipeResult:
    """Closed-form frame-potential values for k = 1..max(k_list)."""
    k_max = max(cfg.k_list)
    result = RecipeResult(["k", "derangement", "theorem1", "brute_force", "haar", "flat_2sp"])
    for k in range(1, k_max + 1):
        value = theorem1_value(k)
        brute = factorial(k) * fixed_point_weight_sum(k) if k <= 6 else None
        result.rows.append({"k": k, "derangement": derangement(k), "theorem1": value,
                            "brute_force": brute, "haar": haar_fp(k), "flat_2sp": factorial(k) ** 2})
        if brute is not None:
            result.checks.append(Check(f"closed form = enumeration k={k}", brute == value,
                                       f"{value} vs {brute}"))
        incl_excl = sum(Fraction((-1) ** i * factorial(k), factorial(i)) for i in range(k + 1))
        result.checks.append(Check(f"derangement identity n={k}",
                                   incl_excl == derangement(k), f"{derangement(k)}"))
    result.summary = {"k_max": k_max}
    return result


def monomial_suite(p: int) -> list[tuple[tuple, tuple, tuple, tuple]]:
    """Index patterns (i, j, i', j') for orders 1..p, including unbalanced ones."""
    suite = []
    for q in range(1, p + 1):
        zeros, ramp = (0,) * q, tuple(range(q))
        suite.append((zeros, zeros, zeros, zeros))
        suite.append((ramp, ramp, ramp, ramp))
        suite.append((ramp, ramp, ramp[::-1], ramp[::-1]))
        suite.append((ramp, zeros, ramp, zeros))
        suite.append((zeros, zeros, zeros[:-1], zeros[:-1]))
    return suite


def run_weingarten_verify(cfg: ExperimentConfig) -> RecipeResult:
    """Weingarten table at (p, D) and Haar Monte Carlo checks of its monomials."""
    p, D = cfg.p, cfg.model.dim
    table = weingarten_table(p, D)
    result = RecipeResult(["p", "D", "cycle_type", "wg_exact", "wg_float", "wg_times_D_p"])
    for cls, value in sorted(table.values.items()):
        result.rows.append({"p": p, "D": D, "cycle_type": "-".join(map(str, cls)),
                            "wg_exact": str(value), "wg_float": float(value),
                            "wg_times_D_p": float(value * D**p)})
    perms = list(all_perms(p))
    wg = np.array([[float(table(compose(s, inverse(t)))) for t in perms] for s in perms])
    residual = float(np.max(np.abs(gram_matrix(p, D) @ wg - np.eye(len(perms)))))
    result.checks.append(Check("gram times weingarten = identity",
                               residual < 1e-10 * factorial(p), f"residual {residual:.3g}"))
    monomials = []
    if D <= MONOMIAL_D_MAX:
        q_max = min(p, MONOMIAL_P_MAX)
        for n, (i, j, ip, jp) in enumerate(monomial_suite(q_max)):
            chk = verify_haar_monomial(len(i), D, i, j, ip, jp, cfg.samples,
                                       derive_seed(cfg.seed, "monomial", n), cfg.threads or 1)
            monomials.append({"i": i, "j": j, "ip": ip, "jp": jp,
                              "mc_mean": [chk.mc_mean.real, chk.mc_mean.imag],
                              "predicted": chk.predicted.real, "z_score": chk.z_score})
            result.checks.append(Check(f"monomial i={i} j={j} i'={ip} j'={jp}", chk.z_score < 4,
                                       f"z = {chk.z_score:.3g}"))
    else:
        result.notes.append(f"monomial Monte Carlo skipped: D > {MONOMIAL_D_MAX}")
    result.summary = {"p": p, "D": D, "monomials": monomials, "gram_residual": residual}
    return result


def run_epsilon_scaling(cfg: ExperimentConfig) -> RecipeResult:
    """eps_H(T) of the model's first Hamiltonian on the T grid, with its log-log slope."""
    spec = cfg.model
    spectrum = model_eigensystems(spec, 1)[0].eigenvalues
    t_h = heisenberg_time(spectrum)
    result = RecipeResult(["model", "D", "seed", "T", "epsilon", "heisenberg_time"])
    eps = []
    for T in cfg.T_grid:
        e = epsilon_h(spectrum, TimeWindow(T)).epsilon
        eps.append(e)
        result.rows.append({"model": spec.kind.value, "D": spec.dim, "seed": spec.seed,
                            "T": T, "epsilon": e, "heisenberg_time": t_h})
        result.checks.append(Check(f"epsilon in [0, 1] T={T:.4g}", 0.0 <= e <= 1.0, f"{e:.6g}"))
        if T >= t_h:
            later = epsilon_h(spectrum, TimeWindow(10 * T)).epsilon
            result.checks.append(Check(f"epsilon(10 T) < epsilon(T) T={T:.4g}", later < e,
                                       f"{later:.4g} vs {e:.4g}"))
    T = np.array(cfg.T_grid)
    keep = (T >= 3 * t_h) & (np.array(eps) > 0)
    summary = {"model": spec.to_dict(), "heisenberg_time": t_h, "slope": None, "slope_err": None}
    if keep.sum() >= 2:
        slope, err, _ = loglog_fit(T[keep], np.array(eps)[keep])
        summary.update(slope=slope, slope_err=err)
    else:
        result.notes.append("fewer than two grid points beyond 3x the Heisenberg time")
    result.summary = summary
    return result


def _agree(a, b) -> tuple[bool, float]:
    (ma, sa), (mb, sb) = a, b
    sigma = math.hypot(sa, sb)
    gap = abs(ma - mb)
    return gap <= 3 * sigma, (gap / sigma if sigma else (0.0 if gap == 0 else math.inf))


def _triangle(result, protocol, D, k, values, seed, cfg):
    for name, (mean, err, T) in values.items():
        result.rows.append({"protocol": protocol.value, "model": "haar", "D": D, "k": k, "T": T,
                            "samples": cfg.samples if err else 0, "seed": seed,
                            "estimator": name, "fp_mean": mean, "fp_stderr": err})
    names = list(values)
    for x in range(len(names)):
        for y in range(x + 1, len(names)):
            a, b = values[names[x]], values[names[y]]
            ok, z = _agree(a[:2], b[:2])
            result.checks.append(Check(f"{protocol.value} k={k} D={D} {names[x]} ~ {names[y]}",
                                       ok, f"{a[0]:.6g} vs {b[0]:.6g}, {z:.2f} sigma"))


def run_oracle_triangle(cfg: ExperimentConfig) -> RecipeResult:
    """Permutation sum, phase ensemble, and long-T Monte Carlo on one Haar overlap.

    The 2SP triangle runs at ``cfg.model.dim`` for every k; the 3SP k = 1
    triangle (closed form, phase ensemble, long-T Monte Carlo) runs at
    ``cfg.dim_3sp`` unless that is 0.
    """
    T = cfg.T or DEFAULT_LONG_T
    result = RecipeResult(FP_COLUMNS[:7] + ["estimator", "fp_mean", "fp_stderr"])
    D = cfg.model.dim
    eigs = haar_model(D, 2, derive_seed(cfg.seed, "triangle-2sp"))
    u = overlap(*eigs).entries
    for k in sorted(set(cfg.k_list)):
        pc = ProtocolConfig(Protocol.TWO_STEP, eigs, TimeWindow(T), k=k, samples=cfg.samples,
                            seed=derive_seed(cfg.seed, "triangle-2sp", k))
        phase = fp_perfect_phase(pc, cfg.threads)
        mc = fp_monte_carlo(replace(pc, seed=derive_seed(pc.seed, "mc")), cfg.threads)
        values = {
            "permsum": (fp_perfect_permsum_2sp(u, k), 0.0, math.inf),
            "phase": (phase.mean, phase.stderr, math.inf),
            "monte_carlo": (mc.mean, mc.stderr, T),
        }
        _triangle(result, Protocol.TWO_STEP, D, k, values, pc.seed, cfg)
    if cfg.dim_3sp:
        D3 = cfg.dim_3sp
        eigs3 = haar_model(D3, 3, derive_seed(cfg.seed, "triangle-3sp"))
        pc = ProtocolConfig(Protocol.THREE_STEP, eigs3, TimeWindow(T), k=1, samples=cfg.samples,
                            seed=derive_seed(cfg.seed, "triangle-3sp", 1))
        phase = fp_perfect_phase(pc, cfg.threads)
        mc = fp_monte_carlo(replace(pc, seed=derive_seed(pc.seed, "mc")), cfg.threads)
        exact = fp_perfect_exact_3sp_k1(overlap(eigs3[0], eigs3[1]).entries,
                                        overlap(eigs3[1], eigs3[2]).entries)
        values = {
            "exact_k1": (exact, 0.0, math.inf),
            "phase": (phase.mean, phase.stderr, math.inf),
            "monte_carlo": (mc.mean, mc.stderr, T),
        }
        _triangle(result, Protocol.THREE_STEP, D3, 1, values, pc.seed, cfg)
    result.summary = {"D": D, "dim_3sp": cfg.dim_3sp, "T": T, "k": list(cfg.k_list)}
    return result


RUNNERS = {
    Recipe.FP_VS_K: run_fp_vs_k,
    Recipe.ERROR_VS_T: run_error_vs_t,
    Recipe.THEOREM_TABLE: run_theorem_table,
    Recipe.WEINGARTEN_VERIFY: run_weingarten_verify,
    Recipe.EPSILON_SCALING: run_epsilon_scaling,
    Recipe.ORACLE_TRIANGLE: run_oracle_triangle,
}


def run(cfg: ExperimentConfig) -> RecipeResult:
    return RUNNERS[cfg.validate().recipe](cfg)
