"""Result emission, JSON config loading, and the on-disk eigensystem cache."""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError
from .hamiltonians import ModelKind, ModelSpec, build_hamiltonian, flat_model
from .spectral import EigenSystem, eigendecompose, load, save

CACHE_ENV = "KDESIGN_CACHE_DIR"


def _cell(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return "" if value is None else str(value)


def write_csv(rows: Sequence[Mapping], columns: Sequence[str], out=None) -> None:
    """Write ``rows`` to ``out`` (a path, or stdout for None / "-")."""
    def emit(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])

    if out in (None, "-"):
        emit(sys.stdout)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as handle:
            emit(handle)


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True)


def write_json(obj, path) -> None:
    if path in (None, "-"):
        print(dumps(obj))
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dumps(obj) + "\n")


def summary_path(out) -> str | None:
    """JSON summary path next to a CSV output, or None for stdout output."""
    if out in (None, "-"):
        return None
    return str(Path(out).with_suffix(".json"))


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def cache_dir() -> Path | None:
    root = os.environ.get(CACHE_ENV)
    return Path(root) if root else None


def cached_eigensystem(spec: ModelSpec, realization: int) -> EigenSystem:
    """Eigensystem of one Hamiltonian realization, cached when KDESIGN_CACHE_DIR is set."""
    root = cache_dir()
    path = root / f"{spec.digest()}-{realization}.json" if root else None
    if path is not None and path.exists():
        obj = load(path)
        if isinstance(obj, EigenSystem) and obj.dim == spec.dim:
            return obj
    eig = eigendecompose(build_hamiltonian(spec, realization))
    if path is not None:
        root.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        save(eig, tmp)
        tmp.replace(path)
    return eig


def model_eigensystems(spec: ModelSpec, count: int) -> list[EigenSystem]:
    """``count`` quenched eigensystems of the model (flat: Fourier overlaps)."""
    if spec.kind is ModelKind.FLAT:
        return flat_model(spec.size, count, spec.seed)
    return [cached_eigensystem(spec, l) for l in range(count)]
