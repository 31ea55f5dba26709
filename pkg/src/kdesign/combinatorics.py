"""Permutations, derangements, and the closed-form frame-potential values.

Permutations are stored 0-based in one-line notation and displayed 1-based.
Every value here is an exact Python integer.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations, product
from math import comb, factorial
from typing import Iterator, Sequence

from .errors import DimensionMismatchError, TooLargeError

K_MAX = 10
PAIRING_K_MAX = 6
_BRUTE_K_MAX = 6


@dataclass(frozen=True)
class Perm:
    images: tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        if sorted(images) != list(range(len(images))):
            raise ValueError(f"{images} is not a permutation of 0..{len(images) - 1}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, k: int) -> "Perm":
        return cls(tuple(range(k)))

    @classmethod
    def from_cycles(cls, k: int, *cycles: Sequence[int]) -> "Perm":
        """Build from 1-based cycles, e.g. ``Perm.from_cycles(3, (1, 3, 2))``."""
        images = list(range(k))
        for cycle in cycles:
            for a, b in zip(cycle, tuple(cycle[1:]) + (cycle[0],)):
                images[a - 1] = b - 1
        return cls(tuple(images))

    @property
    def size(self) -> int:
        return len(self.images)

    def __call__(self, r: int) -> int:
        return self.images[r]

    def cycle_type(self) -> tuple[int, ...]:
        """Cycle lengths sorted descending, i.e. a partition of ``size``."""
        seen = [False] * self.size
        lengths = []
        for start in range(self.size):
            if seen[start]:
                continue
            n, r = 0, start
            while not seen[r]:
                seen[r] = True
                r = self.images[r]
                n += 1
            lengths.append(n)
        return tuple(sorted(lengths, reverse=True))

    def __str__(self) -> str:
        return "[" + " ".join(str(i + 1) for i in self.images) + "]"


def _check_sizes(a: Perm, b: Perm) -> None:
    if a.size != b.size:
        raise DimensionMismatchError(f"permutation sizes {a.size} and {b.size} differ")


def compose(a: Perm, b: Perm) -> Perm:
    """``a o b``: apply ``b`` first."""
    _check_sizes(a, b)
    return Perm(tuple(a.images[b.images[r]] for r in range(a.size)))


def inverse(a: Perm) -> Perm:
    inv = [0] * a.size
    for r, ar in enumerate(a.images):
        inv[ar] = r
    return Perm(tuple(inv))


def fix_count(a: Perm) -> int:
    return sum(1 for r, ar in enumerate(a.images) if r == ar)


def all_perms(k: int) -> Iterator[Perm]:
    for images in permutations(range(k)):
        yield Perm(images)


@lru_cache(maxsize=None)
def derangement(n: int) -> int:
    """Number of fixed-point-free permutations of n elements."""
    if n < 0:
        raise ValueError(f"derangement needs n >= 0, got {n}")
    a, b = 1, 0  # !0, !1
    if n == 0:
        return a
    for m in range(2, n + 1):
        a, b = b, (m - 1) * (a + b)
    return b


def fixed_point_weight_sum(k: int) -> int:
    """Brute-force sum over S_k of 2^fix(rho)."""
    if k > _BRUTE_K_MAX:
        raise TooLargeError(f"enumeration of S_{k} is capped at k = {_BRUTE_K_MAX}")
    return sum(2 ** fix_count(rho) for rho in all_perms(k))


def theorem1_value(k: int) -> int:
    """Large-D Haar average of the perfect-filter two-step frame potential.

    k! * sum_j C(k, j) * !(k - j) * 2^j. For k <= 6 the closed form is checked
    against k! * sum_{rho in S_k} 2^fix(rho) by enumeration.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > K_MAX:
        raise TooLargeError(f"k is capped at {K_MAX}")
    value = factorial(k) * sum(comb(k, j) * derangement(k - j) * 2**j for j in range(k + 1))
    if k <= _BRUTE_K_MAX:
        brute = factorial(k) * fixed_point_weight_sum(k)
        if brute != value:
            raise AssertionError(f"closed form {value} != enumeration {brute} at k={k}")
    return value


def haar_fp(k: int) -> int:
    """Haar frame potential k!, the minimum over all ensembles."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return factorial(k)


def pair_positions(perm: Perm) -> list[frozenset[int]]:
    """Position pairs {r, k + perm^{-1}(r)} (0-based) of the doubled index sequence."""
    inv = inverse(perm)
    k = perm.size
    return [frozenset((r, k + inv(r))) for r in range(k)]


def pairing_group(perm: Perm) -> Iterator[tuple[int, ...]]:
    """The 2^k permutations of 2k positions that swap-or-keep each pair."""
    pairs = [tuple(sorted(p)) for p in pair_positions(perm)]
    for swaps in product((False, True), repeat=len(pairs)):
        alpha = list(range(2 * perm.size))
        for (x, y), swap in zip(pairs, swaps):
            if swap:
                alpha[x], alpha[y] = y, x
        yield tuple(alpha)


def pairing_intersection_size(pi: Perm, sigma: Perm) -> int:
    """|G_m(pi) & G_n(sigma)| by enumeration of G_m(pi).

    Asserts the result equals 2^fix(pi^{-1} sigma).
    """
    _check_sizes(pi, sigma)
    if pi.size > PAIRING_K_MAX:
        raise TooLargeError(f"pairing enumeration is capped at k = {PAIRING_K_MAX}")
    n_pairs = pair_positions(sigma)
    count = 0
    for alpha in pairing_group(pi):
        if all(frozenset(alpha[x] for x in pair) == pair for pair in n_pairs):
            count += 1
    expected = 2 ** fix_count(compose(inverse(pi), sigma))
    if count != expected:
        raise AssertionError(f"pairing count {count} != 2^fix = {expected}")
    return count
