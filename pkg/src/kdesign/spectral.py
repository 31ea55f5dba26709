"""Eigendecomposition and eigenbasis overlap matrices."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ContractViolation,
    DegenerateSpectrumError,
    DegenerateSpectrumWarning,
    DimensionMismatchError,
    InvalidDimensionError,
)

UNITARITY_TOL = 1e-10
RESIDUAL_TOL = 1e-9
HERMITICITY_TOL = 1e-12
DEGENERACY_GAP = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


def _unitarity_error(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Sorted eigenvalues and the matching unitary eigenvector matrix.

    Column ``m`` of ``eigenvectors`` is the eigenvector of ``eigenvalues[m]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float)
        vecs = np.asarray(self.eigenvectors, dtype=complex)
        if vals.ndim != 1 or vecs.shape != (vals.size, vals.size) or vals.size == 0:
            raise InvalidDimensionError(
                f"eigenvalues {vals.shape} and eigenvectors {vecs.shape} do not match"
            )
        if np.any(np.diff(vals) < 0):
            raise ContractViolation("eigenvalues must be sorted ascending")
        err = _unitarity_error(vecs)
        if err > UNITARITY_TOL:
            raise ContractViolation(f"eigenvector matrix not unitary (error {err:.2e})")
        object.__setattr__(self, "eigenvalues", _readonly(vals))
        object.__setattr__(self, "eigenvectors", _readonly(vecs))

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def spectral_width(self) -> float:
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    def to_json(self) -> dict:
        return {
            "type": "EigenSystem",
            "dim": self.dim,
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": _complex_pairs(self.eigenvectors),
        }

    @classmethod
    def from_json(cls, data: dict) -> "EigenSystem":
        dim = int(data["dim"])
        return cls(np.asarray(data["eigenvalues"], dtype=float),
                   _from_complex_pairs(data["eigenvectors"], dim))


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    """Unitary change of basis ``U_{mn} = <a_m|b_n>`` between two eigenbases."""

    entries: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.entries, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] == 0:
            raise InvalidDimensionError(f"overlap matrix must be square, got {u.shape}")
        err = _unitarity_error(u)
        if err > UNITARITY_TOL:
            raise ContractViolation(f"overlap matrix not unitary (error {err:.2e})")
        object.__setattr__(self, "entries", _readonly(u))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def weights(self) -> np.ndarray:
        """Elementwise ``|U_{mn}|^2``; rows and columns each sum to one."""
        w = np.abs(self.entries) ** 2
        w.flags.writeable = False
        return w

    def to_json(self) -> dict:
        return {"type": "OverlapMatrix", "dim": self.dim,
                "entries": _complex_pairs(self.entries)}

    @classmethod
    def from_json(cls, data: dict) -> "OverlapMatrix":
        return cls(_from_complex_pairs(data["entries"], int(data["dim"])))


def _complex_pairs(a: np.ndarray) -> list:
    flat = np.asarray(a).reshape(-1)
    return np.stack([flat.real, flat.imag], axis=1).tolist()


def _from_complex_pairs(pairs, dim: int) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float).reshape(dim * dim, 2)
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(dim, dim)


def as_unitary(u) -> np.ndarray:
    return u.entries if isinstance(u, OverlapMatrix) else np.asarray(u, dtype=complex)


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude component is real positive."""
    v = np.array(vectors, dtype=complex, copy=True)
    idx = np.argmax(np.abs(v), axis=0)
    pivot = v[idx, np.arange(v.shape[1])]
    v /= pivot / np.abs(pivot)
    return v


def degeneracy_gap(eigenvalues: np.ndarray) -> float:
    """Smallest adjacent gap relative to the spectral width (inf for D=1)."""
    e = np.sort(np.asarray(eigenvalues, dtype=float))
    if e.size < 2:
        return np.inf
    width = e[-1] - e[0]
    if width == 0:
        return 0.0
    return float(np.min(np.diff(e)) / width)


def check_nondegenerate(eigenvalues: np.ndarray, strict: bool = False) -> bool:
    """Warn (or raise, if ``strict``) when two levels are closer than 1e-12 of the width."""
    if degeneracy_gap(eigenvalues) > DEGENERACY_GAP:
        return True
    msg = "spectrum is degenerate within 1e-12 of its width"
    if strict:
        raise DegenerateSpectrumError(msg)
    warnings.warn(msg, DegenerateSpectrumWarning, stacklevel=2)
    return False


def eigendecompose(h) -> EigenSystem:
    """Dense Hermitian diagonalization with deterministic eigenvector phases.

    ``h`` may be a :class:`~kdesign.hamiltonians.HermitianOperator` or a raw
    array. Raises :class:`ContractViolation` when it is not Hermitian.
    """
    mat = np.asarray(getattr(h, "matrix", h), dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise InvalidDimensionError(f"expected a square matrix, got {mat.shape}")
    scale = float(np.max(np.abs(mat)))
    if np.max(np.abs(mat - mat.conj().T)) > HERMITICITY_TOL * scale:
        raise ContractViolation("matrix is not Hermitian")

    vals, vecs = np.linalg.eigh(mat)
    vecs = fix_phases(vecs)
    residual = np.max(np.linalg.norm(mat @ vecs - vecs * vals, axis=0))
    bound = RESIDUAL_TOL * max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
    if residual > bound:
        raise ContractViolation(f"eigen-residual {residual:.2e} exceeds {bound:.2e}")
    if vals.size > 1:
        check_nondegenerate(vals)
    return EigenSystem(vals, vecs)


def overlap(a: EigenSystem, b: EigenSystem) -> OverlapMatrix:
    """``W_a^dagger W_b``: entry (m, n) is <a_m|b_n>."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dims {a.dim} and {b.dim} differ")
    return OverlapMatrix(a.eigenvectors.conj().T @ b.eigenvectors)


def ipr(u) -> float:
    """Inverse participation ratio sum |U_mn|^4, which lies in [1, D] for unitary U."""
    w = u.weights if isinstance(u, OverlapMatrix) else np.abs(as_unitary(u)) ** 2
    return float(np.sum(w * w))


def embed_overlaps(overlaps: Sequence, spectra: Sequence[np.ndarray]) -> list[EigenSystem]:
    """Eigensystems with prescribed consecutive overlaps and eigenvalues.

    The first basis is the identity and basis ``l+1`` is ``W_l @ overlaps[l]``,
    so ``overlap(result[l], result[l+1])`` reproduces ``overlaps[l]``.
    """
    if len(spectra) != len(overlaps) + 1:
        raise DimensionMismatchError("need exactly one more spectrum than overlaps")
    dim = len(spectra[0])
    w = np.eye(dim, dtype=complex)
    out = [EigenSystem(np.sort(spectra[0]), w)]
    for u, spec in zip(overlaps, spectra[1:]):
        u = as_unitary(u)
        if u.shape != (dim, dim) or len(spec) != dim:
            raise DimensionMismatchError("overlap and spectrum dimensions differ")
        w = w @ u
        out.append(EigenSystem(np.sort(spec), w))
    return out


def save(obj: EigenSystem | OverlapMatrix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj.to_json()))


def load(path: str | Path) -> EigenSystem | OverlapMatrix:
    data = json.loads(Path(path).read_text())
    kind = data.get("type")
    if kind == "EigenSystem":
        return EigenSystem.from_json(data)
    if kind == "OverlapMatrix":
        return OverlapMatrix.from_json(data)
    raise ValueError(f"unknown container type {kind!r}")
