"""Property-based checks of the structural invariants."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kdesign.combinatorics import (
    Perm,
    compose,
    derangement,
    fix_count,
    inverse,
    pairing_intersection_size,
)
from kdesign.frame_potential import trace_2sp, trace_3sp
from kdesign.hamiltonians import build_csyk, build_rspin, sample_gue
from kdesign.leakage import log_grid
from kdesign.rng import derive_seed, stream
from kdesign.spectral import eigendecompose, ipr, overlap
from kdesign.stats import RunningMean
from kdesign.temporal import TimeWindow, epsilon_h, filter_value
from kdesign.weingarten import gram_matrix, haar_sample, weingarten_table

seeds = st.integers(min_value=0, max_value=2**63 - 1)


@st.composite
def perms(draw, k=None):
    k = draw(st.integers(1, 6)) if k is None else k
    return Perm(tuple(draw(st.permutations(range(k)))))


@st.composite
def perm_pairs(draw):
    k = draw(st.integers(1, 6))
    return draw(perms(k)), draw(perms(k))


@given(perm_pairs())
def test_pairing_count_is_two_to_fixed_points(pair):
    pi, sigma = pair
    assert pairing_intersection_size(pi, sigma) == 2 ** fix_count(compose(inverse(pi), sigma))


@given(perm_pairs())
def test_group_axioms(pair):
    a, b = pair
    e = Perm.identity(a.size)
    assert compose(a, inverse(a)) == e == compose(inverse(a), a)
    assert inverse(compose(a, b)) == compose(inverse(b), inverse(a))
    assert sum(a.cycle_type()) == a.size


@given(st.integers(0, 16))
def test_derangement_ratio_tends_to_inverse_e(n):
    if n >= 1:
        assert abs(derangement(n) - math.factorial(n) / math.e) < 0.5 + 1e-9


@given(st.floats(-1e3, 1e3, allow_nan=False), st.floats(1e-3, 1e4))
def test_filter_even_and_bounded(de, T):
    w = TimeWindow(T)
    v = filter_value(de, w)
    assert 0.0 <= v <= 1.0
    assert v == filter_value(-de, w)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=30),
       st.floats(-100, 100), st.floats(1e-2, 1e5))
def test_epsilon_bounded_and_shift_invariant(levels, shift, T):
    e = np.array(levels)
    w = TimeWindow(T)
    eps = epsilon_h(e, w).epsilon
    assert 0.0 <= eps <= 1.0
    assert abs(epsilon_h(e + shift, w).epsilon - eps) < 1e-6


@given(st.integers(1, 30), seeds)
def test_ipr_bounds_for_unitaries(D, seed):
    u = haar_sample(D, stream(seed, "prop"))
    assert 1 - 1e-9 <= ipr(u) <= D + 1e-9


@given(st.integers(1, 25), seeds)
def test_gue_hermitian_and_self_overlap(D, seed):
    h = sample_gue(D, seed)
    assert np.array_equal(h.matrix, h.matrix.conj().T)
    e = eigendecompose(h) if D > 1 else eigendecompose(h.matrix)
    assert np.max(np.abs(overlap(e, e).entries - np.eye(D))) < 1e-10


@given(st.sampled_from([4, 6]), st.floats(0.1, 3.0), st.floats(0.0, 2.0), seeds)
def test_sector_models_hermitian_and_reproducible(N, J, h, seed):
    for build in (lambda: build_csyk(N, J, seed), lambda: build_rspin(N, J, h, seed)):
        a, b = build(), build()
        assert np.array_equal(a.matrix, b.matrix)
        assert np.max(np.abs(a.matrix - a.matrix.conj().T)) <= 1e-12 * max(np.max(np.abs(a.matrix)), 1e-300)
        assert a.dim == math.comb(N, N // 2)


@pytest.mark.filterwarnings("ignore::kdesign.errors.IllConditionedWarning")
@given(st.integers(1, 3), st.integers(0, 40))
def test_gram_times_weingarten(p, extra):
    D = p + extra
    table = weingarten_table(p, D)
    from kdesign.combinatorics import all_perms

    ps = list(all_perms(p))
    wg = np.array([[float(table(compose(s, inverse(t)))) for t in ps] for s in ps])
    assert np.max(np.abs(gram_matrix(p, D) @ wg - np.eye(len(ps)))) < 1e-10 * math.factorial(p)


@given(st.integers(2, 12), seeds, st.lists(st.floats(-50, 50), min_size=4, max_size=4))
def test_traces_bounded_by_dimension(D, seed, times):
    e = [eigendecompose(sample_gue(D, derive_seed(seed, l))) for l in range(3)]
    assert abs(trace_2sp(e[0], e[1], *times[:2])) <= D * (1 + 1e-12)
    assert abs(trace_3sp(*e, *times)) <= D * (1 + 1e-12)


@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40), min_size=1, max_size=8))
def test_running_mean_matches_numpy(chunks):
    acc = RunningMean()
    for c in chunks:
        acc.add(c)
    flat = np.concatenate([np.array(c) for c in chunks])
    scale = max(np.max(np.abs(flat)), 1.0)
    assert abs(acc.mean - flat.mean()) <= 1e-9 * scale
    if flat.size > 1:
        assert abs(acc.variance - flat.var(ddof=1)) <= 1e-7 * scale**2


@given(seeds, st.text(min_size=1, max_size=8))
def test_streams_are_deterministic(seed, name):
    a = stream(seed, name, 1).standard_normal(4)
    b = stream(seed, name, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert derive_seed(seed, name) == derive_seed(seed, name)


@given(st.floats(1e-3, 1e3), st.floats(1.5, 1e4), st.integers(1, 12))
def test_log_grid_endpoints(lo, ratio, per_decade):
    g = log_grid(lo, lo * ratio, per_decade)
    assert math.isclose(g[0], lo) and math.isclose(g[-1], lo * ratio)
    assert np.all(np.diff(g) > 0)
