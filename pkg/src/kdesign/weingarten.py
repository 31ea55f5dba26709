"""Haar-unitary sampling and the unitary Weingarten function.

Wg_D is obtained by inverting the Gram matrix G_{sigma,tau} = D^{#cycles(sigma tau^-1)}
of S_p. Two routes are provided:

* the class-collapsed system, one unknown per cycle type, solved in exact
  rational arithmetic (:class:`fractions.Fraction`);
* the full p! x p! floating-point inverse, which is the definitional check.

For p <= 3 :func:`weingarten_table` asserts the two agree.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .combinatorics import Perm, all_perms, compose, inverse
from .errors import IllConditionedWarning, SingularGramError, TooLargeError
from .rng import stream
from .stats import RunningMean

P_MAX = 4
MONOMIAL_P_MAX = 3
MONOMIAL_D_MAX = 16
CHUNK = 2048


def _check(p: int, D: int) -> None:
    if not 1 <= p <= P_MAX:
        raise TooLargeError(f"p must be in 1..{P_MAX}, got {p}")
    if D < p:
        raise SingularGramError(f"Gram matrix of S_{p} is singular for D = {D} < p")


def n_cycles(perm: Perm) -> int:
    return len(perm.cycle_type())


def gram_matrix(p: int, D: int) -> np.ndarray:
    """G_{sigma,tau} = D^{#cycles(sigma tau^-1)} over S_p in lexicographic order."""
    _check(p, D)
    perms = list(all_perms(p))
    return np.array(
        [[float(D) ** n_cycles(compose(s, inverse(t))) for t in perms] for s in perms]
    )


def partitions(p: int) -> list[tuple[int, ...]]:
    """Partitions of p in descending-part form, identity class (1,...,1) last."""
    out = []

    def rec(rest, largest, prefix):
        if rest == 0:
            out.append(tuple(prefix))
            return
        for part in range(min(rest, largest), 0, -1):
            rec(rest - part, part, prefix + [part])

    rec(p, p, [])
    return out


def _solve_exact(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(b)
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[pivot] = m[pivot], m[col]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col] / m[col][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


def class_weingarten(p: int, D: int) -> dict[tuple[int, ...], Fraction]:
    """Exact Wg_D on each cycle type, from the class-collapsed Gram system.

    For a representative sigma of class lambda,
    sum_mu [sum_{tau in mu} D^{#cycles(sigma tau^-1)}] Wg(mu) = [lambda is identity].
    """
    _check(p, D)
    classes = partitions(p)
    members: dict[tuple[int, ...], list[Perm]] = {c: [] for c in classes}
    for perm in all_perms(p):
        members[perm.cycle_type()].append(perm)
    ident = tuple([1] * p)
    a = []
    for lam in classes:
        rep = members[lam][0]
        a.append([
            Fraction(sum(D ** n_cycles(compose(rep, inverse(t))) for t in members[mu]))
            for mu in classes
        ])
    b = [Fraction(int(lam == ident)) for lam in classes]
    return dict(zip(classes, _solve_exact(a, b)))


def full_weingarten(p: int, D: int) -> np.ndarray:
    """(G^-1) over S_p by floating-point inversion.

    Warns at D = p, the edge of invertibility, where the smallest Gram
    eigenvalue is smallest relative to the largest.
    """
    g = gram_matrix(p, D)
    cond = np.linalg.cond(g)
    if D == p:
        warnings.warn(f"Gram matrix condition number {cond:.3g}", IllConditionedWarning,
                      stacklevel=2)
    return np.linalg.inv(g)


@dataclass(frozen=True)
class WeingartenTable:
    p: int
    D: int
    values: dict = field(repr=False)

    def __call__(self, perm: Perm) -> Fraction:
        return self.values[perm.cycle_type()]

    def as_float(self) -> dict[tuple[int, ...], float]:
        return {c: float(v) for c, v in self.values.items()}

    @property
    def identity_value(self) -> Fraction:
        return self.values[tuple([1] * self.p)]


def weingarten_table(p: int, D: int) -> WeingartenTable:
    """Exact Weingarten values at dimension D, cross-checked for p <= 3."""
    values = class_weingarten(p, D)
    table = WeingartenTable(p, D, values)
    if p <= 3:
        full = full_weingarten(p, D)
        perms = list(all_perms(p))
        expected = np.array(
            [[float(table(compose(s, inverse(t)))) for t in perms] for s in perms]
        )
        scale = np.max(np.abs(expected))
        if np.max(np.abs(full - expected)) > 1e-9 * scale:
            raise AssertionError(f"class-collapsed and full Weingarten differ at p={p}, D={D}")
    return table


def haar_sample(D: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random unitary (or a stack of ``size`` of them).

    QR of a complex Ginibre matrix, with R's diagonal phases pushed into Q so
    the result is exactly Haar distributed.
    """
    if D < 1:
        raise ValueError(f"D must be positive, got {D}")
    shape = (D, D) if size is None else (size, D, D)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


def delta_perm(perm: Perm, i: Sequence[int], ip: Sequence[int]) -> bool:
    """prod_s [i_{perm(s)} == i'_s]."""
    return all(i[perm(s)] == ip[s] for s in range(perm.size))


def predicted_monomial(D: int, i, j, ip, jp) -> complex:
    """Haar average of prod U_{i_r j_r} prod conj(U_{i'_r j'_r}) (0-based indices)."""
    if len(i) != len(j) or len(ip) != len(jp):
        raise ValueError("row and column index tuples must have equal lengths")
    if len(i) != len(ip):
        return 0.0
    p = len(i)
    if p == 0:
        return 1.0
    table = weingarten_table(p, D)
    total = Fraction(0)
    perms = list(all_perms(p))
    for s in perms:
        if not delta_perm(s, i, ip):
            continue
        for t in perms:
            if delta_perm(t, j, jp):
                total += table(compose(s, inverse(t)))
    return complex(float(total))


@dataclass(frozen=True)
class MonomialCheck:
    mc_mean: complex
    predicted: complex
    z_score: float
    stderr: float
    samples: int


def verify_haar_monomial(p: int, D: int, i, j, ip, jp, samples: int, seed: int,
                         threads: int = 1) -> MonomialCheck:
    """Monte Carlo Haar average of a monomial against the Weingarten prediction.

    ``p`` is the number of unconjugated factors, so ``len(i) == len(j) == p``;
    the conjugated tuples may have a different length, in which case the
    prediction is 0. The z-score is |mean - predicted| / stderr with the
    stderr of the complex mean taken as sqrt((var Re + var Im) / n).
    """
    if p > MONOMIAL_P_MAX or D > MONOMIAL_D_MAX:
        raise TooLargeError(f"monomial check limited to p <= {MONOMIAL_P_MAX}, D <= {MONOMIAL_D_MAX}")
    if len(i) != p or len(j) != p:
        raise ValueError(f"expected {p} unconjugated indices")
    i, j, ip, jp = (np.asarray(x, dtype=int) for x in (i, j, ip, jp))
    predicted = predicted_monomial(D, tuple(i), tuple(j), tuple(ip), tuple(jp))

    def chunk(c: int) -> np.ndarray:
        n = min(CHUNK, samples - c * CHUNK)
        u = haar_sample(D, stream(seed, "haar", c), size=n)
        val = np.prod(u[:, i, j], axis=1) * np.prod(u[:, ip, jp].conj(), axis=1)
        return val

    acc_re, acc_im = RunningMean(), RunningMean()
    n_chunks = -(-samples // CHUNK)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for vals in pool.map(chunk, range(n_chunks)):
            acc_re.add(vals.real)
            acc_im.add(vals.imag)
    mean = complex(acc_re.mean, acc_im.mean)
    stderr = float(np.hypot(acc_re.stderr, acc_im.stderr))
    diff = abs(mean - predicted)
    z = 0.0 if diff == 0 else (np.inf if stderr == 0 else diff / stderr)
    return MonomialCheck(mean, predicted, float(z), stderr, samples)
