"""Streaming sample statistics shared by the Monte Carlo estimators."""

from __future__ import annotations

import math

import numpy as np


class RunningMean:
    """Mean and standard error accumulated chunk by chunk.

    Each chunk contributes its exactly-rounded sum (``math.fsum``) and its
    centered sum of squares; chunks are merged with Chan's pairwise update
    while the grand total is carried in a Kahan-compensated accumulator.
    Merging order is the call order, so feeding chunks in a fixed order gives
    bit-identical results.
    """

    def __init__(self):
        self.n = 0
        self._sum = 0.0
        self._comp = 0.0
        self._m2 = 0.0

    def add(self, values) -> None:
        v = np.asarray(values, dtype=float).ravel()
        n_b = v.size
        if n_b == 0:
            return
        sum_b = math.fsum(v)
        mean_b = sum_b / n_b
        m2_b = math.fsum((v - mean_b) ** 2)
        if self.n:
            delta = mean_b - self.mean
            self._m2 += m2_b + delta * delta * self.n * n_b / (self.n + n_b)
        else:
            self._m2 = m2_b
        # Kahan step for the running total
        y = sum_b - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t
        self.n += n_b

    @property
    def mean(self) -> float:
        return self._sum / self.n if self.n else math.nan

    @property
    def variance(self) -> float:
        return self._m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.n) if self.n else math.nan
