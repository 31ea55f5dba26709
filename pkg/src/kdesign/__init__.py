"""Unitary k-design diagnostics for quenched temporal ensembles.

Builds chaotic Hamiltonians, estimates two- and three-step frame potentials
at finite and infinite time windows, and checks them against exact
combinatorial and Weingarten oracles.
"""

from .combinatorics import Perm, derangement, haar_fp, theorem1_value
from .frame_potential import (
    FpEstimate,
    Protocol,
    ProtocolConfig,
    fp_filter_exact_2sp,
    fp_monte_carlo,
    fp_perfect_exact_3sp_k1,
    fp_perfect_permsum_2sp,
    fp_perfect_phase,
)
from .hamiltonians import ModelKind, ModelSpec, build_csyk, build_flat_overlap, build_rspin, sample_gue
from .spectral import EigenSystem, OverlapMatrix, eigendecompose, ipr, overlap
from .temporal import TimeWindow, epsilon_h, filter_value
from .weingarten import haar_sample, weingarten_table

__version__ = "0.1.0"
