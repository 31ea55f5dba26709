"""Frame potentials of the two- and three-step quenched temporal ensembles.

Estimators
----------
``fp_monte_carlo``
    Finite-T Monte Carlo: every evolution time is drawn uniformly on [0, T]
    and each draw contributes ``|Tr|^{2k}`` of the shifted-time trace.
``fp_perfect_phase``
    The T -> infinity limit. Each factor ``exp(i E_m t)`` becomes
    ``exp(i theta_m)`` with theta i.i.d. uniform per level and per draw.

Why random phases give the perfect filter: averaging
``exp(i t sum_a (E_{m_a} - E_{m'_a}))`` over ever longer windows tends to 1
when the two energy sums agree and to 0 otherwise. For a spectrum without
additive resonances the sums agree exactly when the index multisets
``{m_a}`` and ``{m'_a}`` agree. Independent uniform phases give
``E[exp(i sum_a (theta_{m_a} - theta_{m'_a}))] = 1`` under the same
multiset condition and 0 otherwise, so the two averages coincide term by term.

Exact oracles
-------------
``fp_perfect_permsum_2sp`` evaluates the permutation sum over
``(pi, sigma) in S_k x S_k`` by brute-force index summation, and
``fp_perfect_exact_3sp_k1`` is the closed k = 1 value of the three-step sum.
``fp_filter_exact_2sp`` is the exact finite-T two-step value for k <= 2:
the time average factorizes into sinc^2 filters on the energy-sum
differences, contracted against |U|^2 without sampling.

Seeding contract
----------------
Samples are split into fixed-size chunks (``CHUNK_2SP`` or ``CHUNK_3SP``
draws); chunk ``c`` draws from the stream ``(seed, "mc", c)`` in a fixed
order. Chunks are reduced in index order, so estimates are bit-identical for
any worker count. All orders k are computed from the same draws.
"""

from __future__ import annotations

import itertools
import math
import os
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .combinatorics import haar_fp
from .errors import ConfigError, DimensionMismatchError, SampleBoundViolation, TooLargeError
from .rng import stream
from .spectral import EigenSystem, as_unitary, check_nondegenerate, overlap
from .stats import RunningMean
from .temporal import TimeWindow, filter_value, sample_times

__all__ = [
    "Protocol", "ProtocolConfig", "FpEstimate", "trace_2sp", "trace_3sp",
    "fp_monte_carlo", "fp_monte_carlo_multi", "fp_perfect_phase",
    "fp_perfect_phase_multi", "fp_perfect_permsum_2sp", "fp_perfect_exact_3sp_k1",
    "fp_filter_exact_2sp", "haar_fp",
]

CHUNK_2SP = 4096
CHUNK_3SP = 128
PERMSUM_K_MAX = 3
PERMSUM_D_MAX = 16
FILTER_EXACT_D_MAX = {1: 4096, 2: 64}
_BOUND_SLACK = 1e-9


class Protocol(str, Enum):
    TWO_STEP = "2sp"
    THREE_STEP = "3sp"

    @property
    def n_hamiltonians(self) -> int:
        return 2 if self is Protocol.TWO_STEP else 3


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    """Inputs of one frame-potential estimate.

    ``window`` may be ``None`` for the perfect-filter estimator.
    """

    kind: Protocol
    eigensystems: tuple
    window: TimeWindow | None
    k: int = 1
    samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Protocol(self.kind))
        object.__setattr__(self, "eigensystems", tuple(self.eigensystems))
        if len(self.eigensystems) != self.kind.n_hamiltonians:
            raise ConfigError(
                f"{self.kind.value} needs {self.kind.n_hamiltonians} eigensystems, "
                f"got {len(self.eigensystems)}"
            )
        if len({e.dim for e in self.eigensystems}) != 1:
            raise DimensionMismatchError("eigensystem dimensions differ")
        if self.k < 1 or self.samples < 1:
            raise ConfigError("k and samples must be >= 1")

    @property
    def dim(self) -> int:
        return self.eigensystems[0].dim

    @property
    def chunk_size(self) -> int:
        return CHUNK_2SP if self.kind is Protocol.TWO_STEP else CHUNK_3SP


@dataclass(frozen=True)
class FpEstimate:
    k: int
    mean: float
    stderr: float
    samples: int
    seed: int
    T: float

    @property
    def relative_stderr(self) -> float:
        return self.stderr / abs(self.mean) if self.mean else math.inf


def _phases(energies: np.ndarray, times: np.ndarray) -> np.ndarray:
    return np.exp(1j * times[:, None] * energies[None, :])


def trace_2sp(eig_a: EigenSystem, eig_b: EigenSystem, dt1: float, dt2: float) -> complex:
    """Tr(exp(i H_a dt1) exp(i H_b dt2)) from the eigenvalues and |U|^2, in O(D^2)."""
    w = overlap(eig_a, eig_b).weights
    a = np.exp(1j * eig_a.eigenvalues * dt1)
    b = np.exp(1j * eig_b.eigenvalues * dt2)
    return complex(a @ w @ b)


def trace_3sp(eig1: EigenSystem, eig2: EigenSystem, eig3: EigenSystem,
              dt1: float, t2: float, dt3: float, t2p: float) -> complex:
    """Tr[P1(dt1) U1 P2(t2) U2 P3(dt3) U2^+ P2(-t2p) U1^+] with P_l(t) = diag(exp(i E_l t))."""
    if not eig1.dim == eig2.dim == eig3.dim:
        raise DimensionMismatchError("eigensystem dimensions differ")
    u1 = overlap(eig1, eig2).entries
    u2 = overlap(eig2, eig3).entries
    p1 = np.exp(1j * eig1.eigenvalues * dt1)
    p2 = np.exp(1j * eig2.eigenvalues * t2)
    p2p = np.exp(-1j * eig2.eigenvalues * t2p)
    p3 = np.exp(1j * eig3.eigenvalues * dt3)
    left = (p1[:, None] * u1 * p2[None, :]) @ (u2 * p3[None, :])
    right = (u2.conj().T * p2p[None, :]) @ u1.conj().T
    return complex(np.sum(left * right.T))


class _TwoStepKernel:
    def __init__(self, eigs: Sequence[EigenSystem]):
        self.energies = [e.eigenvalues for e in eigs]
        self.weights = overlap(*eigs).weights.astype(complex)

    def traces(self, ph1: np.ndarray, ph2: np.ndarray) -> np.ndarray:
        return np.einsum("sn,sn->s", ph1 @ self.weights, ph2)


class _ThreeStepKernel:
    """Batched three-step traces as two large GEMMs.

    Tr = sum_{p,f} ph2_p conj(ph2'_f) M1_{pf} M2_{pf} with
    M1 = sum_m ph1_m U1_{mp} conj(U1_{mf}) and M2 = sum_g ph3_g U2_{pg} conj(U2_{fg}).
    """

    def __init__(self, eigs: Sequence[EigenSystem]):
        self.energies = [e.eigenvalues for e in eigs]
        u1 = overlap(eigs[0], eigs[1]).entries
        u2 = overlap(eigs[1], eigs[2]).entries
        D = u1.shape[0]
        self.dim = D
        self.k1 = (u1[:, :, None] * u1.conj()[:, None, :]).reshape(D, D * D)
        self.k2 = (u2.T[:, :, None] * u2.conj().T[:, None, :]).reshape(D, D * D)

    def traces(self, ph1, ph2, ph2p, ph3) -> np.ndarray:
        s, D = ph1.shape[0], self.dim
        m = ((ph1 @ self.k1) * (ph3 @ self.k2)).reshape(s, D, D)
        left = np.matmul(ph2[:, None, :], m)[:, 0, :]
        return np.einsum("sf,sf->s", left, ph2p.conj())


def _kernel(config: ProtocolConfig):
    if config.kind is Protocol.TWO_STEP:
        return _TwoStepKernel(config.eigensystems)
    return _ThreeStepKernel(config.eigensystems)


def _time_draw(config: ProtocolConfig, kernel, rng, n: int) -> np.ndarray:
    # draw order per chunk: t1, t1', t2, t2' [, t3, t3'], each a block of n
    e = kernel.energies
    t = sample_times(config.window, 2 * len(e) * n, rng).reshape(2 * len(e), n)
    if config.kind is Protocol.TWO_STEP:
        return kernel.traces(_phases(e[0], t[0] - t[1]), _phases(e[1], t[2] - t[3]))
    return kernel.traces(_phases(e[0], t[0] - t[1]), _phases(e[1], t[2]),
                         _phases(e[1], t[3]), _phases(e[2], t[4] - t[5]))


def _phase_draw(config: ProtocolConfig, kernel, rng, n: int) -> np.ndarray:
    # one angle per level per slot; slots mirror the time draws above
    D = config.dim
    slots = 2 * config.kind.n_hamiltonians
    ph = np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=(slots, n, D)))
    if config.kind is Protocol.TWO_STEP:
        return kernel.traces(ph[0] * ph[1].conj(), ph[2] * ph[3].conj())
    return kernel.traces(ph[0] * ph[1].conj(), ph[2], ph[3], ph[4] * ph[5].conj())


def _default_threads() -> int:
    return os.cpu_count() or 1


def _estimate(config: ProtocolConfig, ks: Sequence[int], draw: Callable, T: float,
              threads: int | None) -> dict[int, FpEstimate]:
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ConfigError("orders k must be >= 1")
    kernel = _kernel(config)
    chunk = config.chunk_size
    n_chunks = -(-config.samples // chunk)
    bound = float(config.dim) ** 2 * (1 + _BOUND_SLACK)

    def run(c: int) -> np.ndarray:
        n = min(chunk, config.samples - c * chunk)
        x = np.abs(draw(config, kernel, stream(config.seed, "mc", c), n)) ** 2
        if np.any(x > bound):
            raise SampleBoundViolation(f"|Tr|^2 = {x.max():.6g} exceeds D^2 = {config.dim ** 2}")
        return x

    accs = {k: RunningMean() for k in ks}
    with ThreadPoolExecutor(max_workers=max(1, threads or _default_threads())) as pool:
        for x in pool.map(run, range(n_chunks)):
            for k in ks:
                accs[k].add(x**k)
    return {k: FpEstimate(k, a.mean, a.stderr, config.samples, config.seed, T)
            for k, a in accs.items()}


def fp_monte_carlo_multi(config: ProtocolConfig, ks: Sequence[int],
                         threads: int | None = None) -> dict[int, FpEstimate]:
    """Finite-T estimates for several orders from one set of time draws."""
    if config.window is None:
        raise ConfigError("fp_monte_carlo needs a time window")
    return _estimate(config, ks, _time_draw, config.window.T, threads)


def fp_monte_carlo(config: ProtocolConfig, threads: int | None = None) -> FpEstimate:
    """Mean of |Tr(V_1^+ V_2)|^{2k} over ``config.samples`` time draws."""
    return fp_monte_carlo_multi(config, [config.k], threads)[config.k]


def fp_perfect_phase_multi(config: ProtocolConfig, ks: Sequence[int],
                           threads: int | None = None) -> dict[int, FpEstimate]:
    for e in config.eigensystems:
        check_nondegenerate(e.eigenvalues, strict=True)
    return _estimate(config, ks, _phase_draw, math.inf, threads)


def fp_perfect_phase(config: ProtocolConfig, threads: int | None = None) -> FpEstimate:
    """Perfect-filter (T -> infinity) frame potential by the random-phase ensemble.

    ``config.window`` is ignored. Raises
    :class:`~kdesign.errors.DegenerateSpectrumError` for degenerate spectra,
    where the multiset argument behind the phase replacement fails.
    """
    return fp_perfect_phase_multi(config, [config.k], threads)[config.k]


def _multiset_weights(D: int, k: int) -> np.ndarray:
    """1 / prod_v mult_v(m)! for every index tuple m, shape (D,)*k."""
    w = np.empty((D,) * k)
    for m in itertools.product(range(D), repeat=k):
        counts = np.bincount(m, minlength=1)
        w[m] = 1.0 / np.prod([math.factorial(c) for c in counts])
    return w


def fp_perfect_permsum_2sp(u, k: int, counting: str = "distinct") -> float:
    """Exact perfect-filter two-step frame potential by index summation.

    Sums prod_a |U_{m_a n_a}|^2 |U_{m_pi(a) n_sigma(a)}|^2 over index tuples
    and permutation pairs (pi, sigma).

    ``counting="permutations"`` is the plain sum over S_k x S_k. A tuple with
    repeated indices is then reached by several permutations giving the same
    primed tuple, and each is counted. For the flat overlap this gives
    exactly (k!)^2 at every D.

    ``counting="distinct"`` (default) counts every distinct primed tuple once
    by weighting each unprimed tuple with 1 / prod(multiplicities!). This is
    the T -> infinity limit of the time average for a resonance-free spectrum,
    and what :func:`fp_perfect_phase` and long-T :func:`fp_monte_carlo`
    estimate. The two countings differ by O(1/D).
    """
    w = as_unitary(u)
    D = w.shape[0]
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > PERMSUM_K_MAX or D > PERMSUM_D_MAX:
        raise TooLargeError(
            f"permutation sum limited to k <= {PERMSUM_K_MAX}, D <= {PERMSUM_D_MAX}"
        )
    if counting not in ("distinct", "permutations"):
        raise ValueError(f"unknown counting {counting!r}")
    p = np.abs(w) ** 2
    letters = string.ascii_letters
    m_idx, n_idx = letters[:k], letters[k:2 * k]
    operands, terms = [], []
    for a in range(k):
        terms.append(m_idx[a] + n_idx[a])
        operands.append(p)
    if counting == "distinct":
        mw = _multiset_weights(D, k)
        terms += [m_idx, n_idx]
        operands += [mw, mw]
    total = 0.0
    for pi in itertools.permutations(range(k)):
        for sigma in itertools.permutations(range(k)):
            sub = terms + [m_idx[pi[a]] + n_idx[sigma[a]] for a in range(k)]
            total += float(np.einsum(",".join(sub) + "->", *operands, *([p] * k),
                                     optimize=False))
    return total


def fp_perfect_exact_3sp_k1(u1, u2) -> float:
    """Exact k = 1 perfect-filter three-step value sum_{p,f} (P^T P)_{pf} (Q Q^T)_{pf}."""
    p = np.abs(as_unitary(u1)) ** 2
    q = np.abs(as_unitary(u2)) ** 2
    if p.shape != q.shape:
        raise DimensionMismatchError(f"overlap shapes {p.shape} and {q.shape} differ")
    return float(np.sum((p.T @ p) * (q @ q.T)))


def _sum_differences(e: np.ndarray, k: int) -> np.ndarray:
    """E_{m_1} + .. + E_{m_k} - E_{m'_1} - .. - E_{m'_k} as a (D,)*2k array."""
    out = np.zeros((1,) * 2 * k)
    for a in range(2 * k):
        shape = [1] * 2 * k
        shape[a] = e.size
        out = out + (1.0 if a < k else -1.0) * e.reshape(shape)
    return out


def fp_filter_exact_2sp(eig_a: EigenSystem, eig_b: EigenSystem, window: TimeWindow,
                        k: int) -> float:
    """Exact finite-T two-step frame potential for k = 1, 2.

    F = sum over index tuples of I_T(dE_a) I_T(dE_b) prod |U|^2, where dE are
    the differences of the k-fold energy sums. The b-side filter tensor is
    pushed through |U|^2 one mode at a time, so the cost is 2k D^(2k+1)
    and the memory D^(2k). As T -> infinity this tends to the ``distinct``
    count of :func:`fp_perfect_permsum_2sp`.
    """
    if k not in FILTER_EXACT_D_MAX:
        raise TooLargeError("exact finite-T evaluation is implemented for k = 1, 2")
    if eig_a.dim != eig_b.dim:
        raise DimensionMismatchError("eigensystem dimensions differ")
    D = eig_a.dim
    if D > FILTER_EXACT_D_MAX[k]:
        raise TooLargeError(f"exact finite-T evaluation at k={k} limited to D <= {FILTER_EXACT_D_MAX[k]}")
    p = overlap(eig_a, eig_b).weights
    x = filter_value(_sum_differences(eig_b.eigenvalues, k), window)
    for a in range(2 * k):
        # contract mode a of the b-side tensor with |U|^2, leaving an a-side index there
        x = np.moveaxis(np.tensordot(p, x, axes=([1], [a])), 0, a)
    return float(np.sum(filter_value(_sum_differences(eig_a.eigenvalues, k), window) * x))
