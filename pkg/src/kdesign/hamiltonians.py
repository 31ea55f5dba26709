"""Model Hamiltonians: GUE, complex SYK, random spin, and the flat-overlap model.

cSYK and rSpin are built directly in the half-filling sector. Basis states are
bitmasks with ``N/2`` set bits sorted ascending; bit ``i`` is the occupation of
fermion ``i`` (cSYK) or the up-state of spin ``i`` (rSpin). Fermionic signs
follow Jordan-Wigner ordering: ``c_i`` picks up ``(-1)**popcount(s & (2**i - 1))``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from math import comb

import numpy as np

from .errors import ConfigError, ContractViolation, InvalidDimensionError, InvalidSectorError
from .rng import derive_seed, stream
from .spectral import EigenSystem, OverlapMatrix, eigendecompose, embed_overlaps

HERMITICITY_TOL = 1e-12


class ModelKind(str, Enum):
    GUE = "gue"
    CSYK = "csyk"
    RSPIN = "rspin"
    FLAT = "flat"


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InvalidDimensionError(f"expected a square matrix, got {m.shape}")
        scale = float(np.max(np.abs(m)))
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL * scale:
            raise ContractViolation("matrix is not Hermitian")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ModelSpec:
    """Which model to build. ``size`` is D for GUE/FLAT and N for CSYK/RSPIN."""

    kind: ModelKind
    size: int
    J: float = 1.0
    h: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.size < 1:
            raise InvalidDimensionError(f"size must be positive, got {self.size}")
        if self.kind in (ModelKind.CSYK, ModelKind.RSPIN):
            if self.size % 2 or self.size < 4:
                raise InvalidSectorError(f"{self.kind.value} needs even N >= 4, got {self.size}")
            if not self.J > 0:
                raise ConfigError(f"J must be positive, got {self.J}")
        if self.h < 0:
            raise ConfigError(f"h must be non-negative, got {self.h}")

    @property
    def dim(self) -> int:
        if self.kind in (ModelKind.CSYK, ModelKind.RSPIN):
            return comb(self.size, self.size // 2)
        return self.size

    def to_dict(self) -> dict:
        key = "n" if self.kind in (ModelKind.CSYK, ModelKind.RSPIN) else "dim"
        return {"kind": self.kind.value, key: self.size, "J": self.J, "h": self.h,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        try:
            kind = ModelKind(str(data["kind"]).lower())
            size = data.get("n", data.get("dim"))
            if size is None:
                raise KeyError("n or dim")
            return cls(kind, int(size), float(data.get("J", 1.0)),
                       float(data.get("h", 0.0)), int(data.get("seed", 0)))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad model spec {data!r}: {exc}") from exc

    def to_text(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.to_dict().items()) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelSpec":
        """Parse either a JSON object or ``key = value`` lines."""
        text = text.strip()
        if text.startswith("{"):
            return cls.from_dict(json.loads(text))
        data = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected 'key = value', got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            data[key] = value
        return cls.from_dict(data)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def sample_gue(D: int, seed: int) -> HermitianOperator:
    """GUE matrix with E|H_ij|^2 = 1/D, so the spectrum fills [-2, 2]."""
    if D < 1:
        raise InvalidDimensionError(f"D must be positive, got {D}")
    rng = stream(seed, "gue")
    x = rng.standard_normal((D, D, 2))
    sigma = np.sqrt(1.0 / (2 * D))
    upper = np.triu((x[..., 0] + 1j * x[..., 1]) * sigma, k=1)
    diag = rng.standard_normal(D) / np.sqrt(D)
    return HermitianOperator(upper + upper.conj().T + np.diag(diag))


def sector_states(n_sites: int, filling: int) -> np.ndarray:
    """Bitmasks of ``n_sites`` bits with ``filling`` bits set, ascending."""
    states = [sum(1 << i for i in occ) for occ in combinations(range(n_sites), filling)]
    return np.array(sorted(states), dtype=np.int64)


def _check_sector(N: int) -> None:
    if N % 2 or N < 4:
        raise InvalidSectorError(f"half filling needs even N >= 4, got {N}")


def _parity_sign(masked: np.ndarray) -> np.ndarray:
    # bitwise_count is uint8; widen before subtracting so -1 does not wrap
    return 1 - 2 * (np.bitwise_count(masked).astype(np.int64) & 1)


def _annihilate(states, valid, sign, site):
    bit = np.int64(1) << site
    valid = valid & ((states & bit) != 0)
    sign = sign * _parity_sign(states & (bit - 1))
    return states ^ bit, valid, sign


def _create(states, valid, sign, site):
    bit = np.int64(1) << site
    valid = valid & ((states & bit) == 0)
    sign = sign * _parity_sign(states & (bit - 1))
    return states ^ bit, valid, sign


def build_csyk(N: int, J: float, seed: int) -> HermitianOperator:
    """Complex SYK at half filling.

    H = sum_{i<j, k<l} J_{ij;kl} c+_i c+_j c_k c_l + h.c. with complex Gaussian
    couplings of total variance 6 J^2 / N^3, split evenly between real and
    imaginary parts. Couplings are drawn in lexicographic order of
    ``((i, j), (k, l))`` from the stream ``(seed, "csyk", "couplings")``.
    """
    _check_sector(N)
    pairs = list(combinations(range(N), 2))
    rng = stream(seed, "csyk", "couplings")
    g = rng.standard_normal((len(pairs), len(pairs), 2))
    couplings = (g[..., 0] + 1j * g[..., 1]) * np.sqrt(3.0 * J * J / N**3)

    basis = sector_states(N, N // 2)
    dim = basis.size
    a = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for p, (i, j) in enumerate(pairs):
        for q, (k, l) in enumerate(pairs):
            s, valid, sign = basis, np.ones(dim, bool), np.ones(dim, np.int64)
            s, valid, sign = _annihilate(s, valid, sign, l)
            s, valid, sign = _annihilate(s, valid, sign, k)
            s, valid, sign = _create(s, valid, sign, j)
            s, valid, sign = _create(s, valid, sign, i)
            if not valid.any():
                continue
            rows = np.searchsorted(basis, s[valid])
            np.add.at(a, (rows, cols[valid]), couplings[p, q] * sign[valid])
    return HermitianOperator(a + a.conj().T)


def build_rspin(N: int, J: float, h: float, seed: int) -> HermitianOperator:
    """Random all-to-all XXZ-type spin model in the S^z = 0 sector.

    H = sum_{i<j} J_ij (Sx Sx + Sy Sy - 2 Sz Sz) + sum_i h_i Sz_i with spin-1/2
    operators, J_ij ~ N(0, 4 J^2 / N) and h_i ~ N(0, h^2).
    """
    _check_sector(N)
    pairs = list(combinations(range(N), 2))
    j_ij = stream(seed, "rspin", "J").standard_normal(len(pairs)) * (2.0 * J / np.sqrt(N))
    h_i = stream(seed, "rspin", "h").standard_normal(N) * h

    basis = sector_states(N, N // 2)
    dim = basis.size
    bits = (basis[:, None] >> np.arange(N)) & 1
    sz = bits - 0.5
    mat = np.zeros((dim, dim))
    diag = sz @ h_i
    cols = np.arange(dim)
    for p, (i, j) in enumerate(pairs):
        diag += -2.0 * j_ij[p] * sz[:, i] * sz[:, j]
        # Sx Sx + Sy Sy = (S+ S- + S- S+) / 2 swaps antiparallel spins
        flip = bits[:, i] != bits[:, j]
        rows = np.searchsorted(basis, basis[flip] ^ ((1 << i) | (1 << j)))
        mat[rows, cols[flip]] += 0.5 * j_ij[p]
    mat[cols, cols] += diag
    return HermitianOperator(mat)


def build_flat_overlap(D: int) -> OverlapMatrix:
    """Discrete Fourier matrix: every |U_mn|^2 equals 1/D."""
    if D < 1:
        raise InvalidDimensionError(f"D must be positive, got {D}")
    m = np.arange(D)
    return OverlapMatrix(np.exp(2j * np.pi * np.outer(m, m) / D) / np.sqrt(D))


def build_hamiltonian(spec: ModelSpec, realization: int = 0) -> HermitianOperator:
    """The ``realization``-th independent Hamiltonian of a model family."""
    if spec.kind is ModelKind.FLAT:
        raise ConfigError("the flat model supplies overlaps, not a Hamiltonian")
    seed = derive_seed(spec.seed, "realization", realization)
    if spec.kind is ModelKind.GUE:
        return sample_gue(spec.size, seed)
    if spec.kind is ModelKind.CSYK:
        return build_csyk(spec.size, spec.J, seed)
    return build_rspin(spec.size, spec.J, spec.h, seed)


def flat_model(D: int, count: int, seed: int) -> list[EigenSystem]:
    """``count`` eigensystems whose consecutive overlaps are all the Fourier matrix.

    Spectra are eigenvalues of independent GUE draws; the flat model carries
    no Hamiltonian of its own.
    """
    spectra = [
        eigendecompose(sample_gue(D, derive_seed(seed, "realization", l))).eigenvalues
        for l in range(count)
    ]
    fourier = build_flat_overlap(D)
    return embed_overlaps([fourier] * (count - 1), spectra)


def haar_model(D: int, count: int, seed: int) -> list[EigenSystem]:
    """``count`` eigensystems with Haar-random consecutive overlaps and GUE spectra."""
    from .weingarten import haar_sample

    spectra = [
        eigendecompose(sample_gue(D, derive_seed(seed, "realization", l))).eigenvalues
        for l in range(count)
    ]
    overlaps = [haar_sample(D, stream(seed, "haar-overlap", l)) for l in range(count - 1)]
    return embed_overlaps(overlaps, spectra)
