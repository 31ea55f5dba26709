"""Named, counter-based random streams.

Every random quantity in the package is drawn from a Philox generator whose
key is derived from ``(master_seed, name_1, name_2, ...)`` through
:class:`numpy.random.SeedSequence`'s ``spawn_key``. String names are mapped to
integers with CRC-32, so a stream's identity is stable across runs, machines
and worker counts. Examples of stream paths used in the package::

    ("gue",)                  GUE matrix entries
    ("csyk", "couplings")     cSYK couplings J_{ij;kl}
    ("rspin", "J")            rSpin exchange couplings
    ("realization", l)        seed of the l-th Hamiltonian of a protocol
    ("mc", chunk)             Monte Carlo chunk ``chunk`` of an estimator
    ("grid", i)               seed of point ``i`` on a T grid

Two streams with different paths are statistically independent.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag(name: int | str) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name) & 0xFFFFFFFF
    return zlib.crc32(str(name).encode("utf-8"))


def _seed_sequence(seed: int, names: tuple) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=int(seed) & _MASK64, spawn_key=tuple(_tag(n) for n in names)
    )


def stream(seed: int, *names: int | str) -> np.random.Generator:
    """Return the Philox generator for the stream ``(seed, *names)``."""
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, names)))


def derive_seed(seed: int, *names: int | str) -> int:
    """Derive a 63-bit child seed, e.g. for the l-th Hamiltonian of a protocol."""
    words = _seed_sequence(seed, names).generate_state(2, dtype=np.uint32)
    return int((int(words[0]) << 32 | int(words[1])) & ((1 << 63) - 1))
