import math

import numpy as np
import pytest
from scipy.linalg import expm

import kdesign.frame_potential as fpm
from kdesign.errors import (
    ConfigError,
    DegenerateSpectrumError,
    DimensionMismatchError,
    SampleBoundViolation,
    TooLargeError,
)
from kdesign.frame_potential import (
    Protocol,
    ProtocolConfig,
    fp_filter_exact_2sp,
    fp_monte_carlo,
    fp_monte_carlo_multi,
    fp_perfect_exact_3sp_k1,
    fp_perfect_permsum_2sp,
    fp_perfect_phase,
    fp_perfect_phase_multi,
    haar_fp,
    trace_2sp,
    trace_3sp,
)
from kdesign.hamiltonians import build_flat_overlap, flat_model, haar_model, sample_gue
from kdesign.rng import stream
from kdesign.spectral import EigenSystem, eigendecompose, embed_overlaps, ipr, overlap
from kdesign.temporal import TimeWindow, epsilon_h, sample_times


def gue_eigs(D, *seeds):
    return [eigendecompose(sample_gue(D, s)) for s in seeds]


def lab(eig, t):
    w = eig.eigenvectors
    return w @ np.diag(np.exp(1j * eig.eigenvalues * t)) @ w.conj().T


# ---- traces -------------------------------------------------------------------

def test_trace_2sp_trivial_cases():
    a, b = gue_eigs(9, 1, 2)
    assert trace_2sp(a, b, 0.0, 0.0) == pytest.approx(9.0)
    assert trace_2sp(a, a, 1.7, -1.7) == pytest.approx(9.0)


def test_trace_2sp_matches_matrix_exponentials():
    D = 10
    ha, hb = sample_gue(D, 3).matrix, sample_gue(D, 4).matrix
    a, b = eigendecompose(ha), eigendecompose(hb)
    for dt1, dt2 in [(0.3, -2.1), (5.0, 7.5), (-11.0, 0.2)]:
        brute = np.trace(expm(1j * ha * dt1) @ expm(1j * hb * dt2))
        assert abs(trace_2sp(a, b, dt1, dt2) - brute) < 1e-8 * D


def test_trace_3sp_matches_matrix_exponentials():
    D = 8
    hs = [sample_gue(D, s).matrix for s in (5, 6, 7)]
    e = [eigendecompose(h) for h in hs]
    for dt1, t2, dt3, t2p in [(0.4, 1.1, -0.7, 2.5), (3.0, -1.0, 8.0, 0.1)]:
        brute = np.trace(expm(1j * hs[0] * dt1) @ expm(1j * hs[1] * t2)
                         @ expm(1j * hs[2] * dt3) @ expm(-1j * hs[1] * t2p))
        assert abs(trace_3sp(*e, dt1, t2, dt3, t2p) - brute) < 1e-8 * D


def test_trace_3sp_reductions():
    e = gue_eigs(7, 1, 2, 3)
    assert trace_3sp(*e, 0, 0, 0, 0) == pytest.approx(7.0)
    got = trace_3sp(*e, 0.9, 1.3, 0.0, 1.3)
    assert got == pytest.approx(np.sum(np.exp(1j * e[0].eigenvalues * 0.9)))


def test_trace_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        trace_2sp(*gue_eigs(3, 1), *gue_eigs(4, 1), 0, 0)
    with pytest.raises(DimensionMismatchError):
        trace_3sp(*gue_eigs(3, 1, 2), *gue_eigs(4, 1), 0, 0, 0, 0)


# ---- config -------------------------------------------------------------------

def test_config_validation():
    e = gue_eigs(4, 1, 2, 3)
    with pytest.raises(ConfigError):
        ProtocolConfig("2sp", e, None)
    with pytest.raises(ConfigError):
        ProtocolConfig("3sp", e[:2], None)
    with pytest.raises(DimensionMismatchError):
        ProtocolConfig("2sp", [e[0], gue_eigs(5, 1)[0]], None)
    with pytest.raises(ConfigError):
        ProtocolConfig("2sp", e[:2], None, k=0)
    with pytest.raises(ConfigError):
        fp_monte_carlo(ProtocolConfig("2sp", e[:2], None))
    assert ProtocolConfig("3sp", e, None).kind is Protocol.THREE_STEP


# ---- Monte Carlo contract -----------------------------------------------------------

def test_monte_carlo_follows_documented_draw_order():
    a, b = gue_eigs(6, 1, 2)
    w = TimeWindow(5.0)
    n = 300
    t = sample_times(w, 4 * n, stream(42, "mc", 0)).reshape(4, n)
    vals = np.array([abs(trace_2sp(a, b, t[0, s] - t[1, s], t[2, s] - t[3, s])) ** 2
                     for s in range(n)])
    est = fp_monte_carlo_multi(ProtocolConfig("2sp", [a, b], w, samples=n, seed=42), [1, 2])
    assert est[1].mean == pytest.approx(vals.mean(), rel=1e-12)
    assert est[2].mean == pytest.approx((vals**2).mean(), rel=1e-12)
    assert est[1].stderr == pytest.approx(vals.std(ddof=1) / np.sqrt(n), rel=1e-9)


def test_monte_carlo_3sp_follows_documented_draw_order():
    e = gue_eigs(5, 1, 2, 3)
    w = TimeWindow(4.0)
    n = 40
    t = sample_times(w, 6 * n, stream(7, "mc", 0)).reshape(6, n)
    vals = [abs(trace_3sp(*e, t[0, s] - t[1, s], t[2, s], t[4, s] - t[5, s], t[3, s])) ** 2
            for s in range(n)]
    est = fp_monte_carlo(ProtocolConfig("3sp", e, w, samples=n, seed=7))
    assert est.mean == pytest.approx(np.mean(vals), rel=1e-12)


@pytest.mark.parametrize("kind", ["2sp", "3sp"])
def test_thread_count_does_not_change_estimates(kind):
    e = gue_eigs(8, 1, 2, 3)[: 2 if kind == "2sp" else 3]
    samples = 3 * ProtocolConfig(kind, e, None).chunk_size + 17
    cfg = ProtocolConfig(kind, e, TimeWindow(30.0), k=2, samples=samples, seed=5)
    one, many = fp_monte_carlo(cfg, threads=1), fp_monte_carlo(cfg, threads=4)
    assert (one.mean, one.stderr) == (many.mean, many.stderr)
    p1, p4 = fp_perfect_phase(cfg, threads=1), fp_perfect_phase(cfg, threads=4)
    assert p1.mean == p4.mean


def test_seed_changes_estimate():
    e = gue_eigs(8, 1, 2)
    a = fp_monte_carlo(ProtocolConfig("2sp", e, TimeWindow(10.0), samples=500, seed=1))
    b = fp_monte_carlo(ProtocolConfig("2sp", e, TimeWindow(10.0), samples=500, seed=2))
    assert a.mean != b.mean and a.seed == 1 and a.T == 10.0


@pytest.mark.parametrize("kind", ["2sp", "3sp"])
def test_eigenvector_phases_do_not_matter(kind):
    e = gue_eigs(7, 1, 2, 3)[: 2 if kind == "2sp" else 3]
    rng = np.random.default_rng(0)
    rotated = [EigenSystem(x.eigenvalues,
                           x.eigenvectors * np.exp(1j * rng.uniform(0, 2 * np.pi, 7)))
               for x in e]
    cfg = ProtocolConfig(kind, e, TimeWindow(20.0), k=2, samples=600, seed=3)
    ref = fp_monte_carlo(cfg)
    got = fp_monte_carlo(ProtocolConfig(kind, rotated, TimeWindow(20.0), k=2, samples=600, seed=3))
    assert got.mean == pytest.approx(ref.mean, rel=1e-11)


def test_identical_weight_tables_give_identical_estimates():
    u = overlap(*gue_eigs(6, 1, 2))
    spectra = [np.sort(np.random.default_rng(s).standard_normal(6)) for s in (1, 2)]
    phased = u.entries * np.exp(1j * np.arange(6))[None, :]
    a = embed_overlaps([u], spectra)
    b = embed_overlaps([phased], spectra)
    cfg = dict(samples=500, seed=9, k=1)
    # same |U|^2 up to rounding of the phase product
    x = fp_monte_carlo(ProtocolConfig("2sp", a, TimeWindow(9.0), **cfg))
    y = fp_monte_carlo(ProtocolConfig("2sp", b, TimeWindow(9.0), **cfg))
    assert x.mean == pytest.approx(y.mean, rel=1e-12)


def test_sample_bound_is_enforced(monkeypatch):
    e = gue_eigs(4, 1, 2)
    monkeypatch.setattr(fpm._TwoStepKernel, "traces",
                        lambda self, a, b: np.full(a.shape[0], 5.0 + 0j))
    with pytest.raises(SampleBoundViolation):
        fp_monte_carlo(ProtocolConfig("2sp", e, TimeWindow(1.0), samples=10))


def test_short_times_give_no_filtering():
    e = gue_eigs(10, 1, 2)
    est = fp_monte_carlo(ProtocolConfig("2sp", e, TimeWindow(1e-6), k=1, samples=200))
    assert est.mean == pytest.approx(100.0, rel=1e-6)


# ---- perfect-filter estimators -------------------------------------------------------

def test_flat_k1_long_time_is_one():
    e = flat_model(32, 2, 1)
    est = fp_monte_carlo(ProtocolConfig("2sp", e, TimeWindow(1e6), samples=50_000, seed=2))
    assert abs(est.mean - 1.0) < 3 * est.stderr


def test_ipr_identity_moderate_d():
    e = gue_eigs(40, 11, 12)
    est = fp_monte_carlo(ProtocolConfig("2sp", e, TimeWindow(1e6), samples=100_000, seed=3))
    assert abs(est.mean - ipr(overlap(*e))) < 3 * est.stderr


def test_phase_estimator_needs_nondegenerate_spectra():
    e = [EigenSystem(np.array([0.0, 0.0, 1.0]), np.eye(3))] * 2
    with pytest.raises(DegenerateSpectrumError):
        fp_perfect_phase(ProtocolConfig("2sp", e, None))


def test_phase_estimate_matches_distinct_permsum_flat():
    D = 8
    e = flat_model(D, 2, 4)
    est = fp_perfect_phase_multi(ProtocolConfig("2sp", e, None, samples=200_000, seed=1), [1, 2])
    assert est[1].mean == pytest.approx(1.0, abs=3 * est[1].stderr)
    distinct = fp_perfect_permsum_2sp(build_flat_overlap(D), 2)
    assert distinct == pytest.approx((2 - 1 / D) ** 2)
    assert abs(est[2].mean - distinct) < 3 * est[2].stderr


def test_phase_3sp_flat_collapses_to_k_factorial():
    e = flat_model(64, 3, 2)
    est = fp_perfect_phase_multi(ProtocolConfig("3sp", e, None, samples=20_000, seed=6), [1, 2])
    for k in (1, 2):
        assert abs(est[k].mean - math.factorial(k)) < max(3 * est[k].stderr, 0.05 * math.factorial(k))


def test_lower_bound_over_estimators():
    e = gue_eigs(16, 1, 2, 3)
    for kind, eigs in (("2sp", e[:2]), ("3sp", e)):
        est = fp_perfect_phase_multi(ProtocolConfig(kind, eigs, None, samples=5000), [1, 2, 3])
        for k, v in est.items():
            assert v.mean >= haar_fp(k) - 5 * v.stderr


# ---- exact oracles -------------------------------------------------------------------

def test_permsum_k1_is_ipr():
    u = overlap(*gue_eigs(9, 1, 2))
    for counting in ("distinct", "permutations"):
        assert fp_perfect_permsum_2sp(u, 1, counting) == pytest.approx(ipr(u), rel=1e-12)


def test_permsum_flat_permutation_counting():
    assert fp_perfect_permsum_2sp(build_flat_overlap(8), 2, "permutations") == pytest.approx(4.0)
    assert fp_perfect_permsum_2sp(build_flat_overlap(5), 3, "permutations") == pytest.approx(36.0)


def test_permsum_brute_force_small():
    # explicit loops over index tuples and permutation pairs
    u = overlap(*gue_eigs(3, 4, 5))
    p = u.weights
    total = 0.0
    import itertools
    for m in itertools.product(range(3), repeat=2):
        for n in itertools.product(range(3), repeat=2):
            for pi in itertools.permutations(range(2)):
                for sg in itertools.permutations(range(2)):
                    total += (p[m[0], n[0]] * p[m[1], n[1]]
                              * p[m[pi[0]], n[sg[0]]] * p[m[pi[1]], n[sg[1]]])
    assert fp_perfect_permsum_2sp(u, 2, "permutations") == pytest.approx(total, rel=1e-12)


def test_permsum_guards():
    with pytest.raises(TooLargeError):
        fp_perfect_permsum_2sp(np.eye(17), 1)
    with pytest.raises(TooLargeError):
        fp_perfect_permsum_2sp(np.eye(4), 4)
    with pytest.raises(ValueError):
        fp_perfect_permsum_2sp(np.eye(4), 1, "bogus")


def test_exact_3sp_k1_values():
    assert fp_perfect_exact_3sp_k1(np.eye(6), np.eye(6)) == pytest.approx(6.0)
    f = build_flat_overlap(9)
    assert fp_perfect_exact_3sp_k1(f, f) == pytest.approx(1.0)
    with pytest.raises(DimensionMismatchError):
        fp_perfect_exact_3sp_k1(np.eye(3), np.eye(4))


def test_exact_3sp_k1_matches_phase_estimator():
    e = haar_model(24, 3, 5)
    exact = fp_perfect_exact_3sp_k1(overlap(e[0], e[1]), overlap(e[1], e[2]))
    est = fp_perfect_phase(ProtocolConfig("3sp", e, None, samples=20_000, seed=2))
    assert abs(est.mean - exact) < 3 * est.stderr


def test_filter_exact_matches_monte_carlo():
    a, b = gue_eigs(6, 1, 2)
    w = TimeWindow(3.0)
    est = fp_monte_carlo_multi(ProtocolConfig("2sp", [a, b], w, samples=200_000, seed=1), [1, 2])
    for k in (1, 2):
        assert abs(fp_filter_exact_2sp(a, b, w, k) - est[k].mean) < 3 * est[k].stderr


def test_filter_exact_limits():
    a, b = gue_eigs(7, 3, 4)
    u = overlap(a, b)
    assert fp_filter_exact_2sp(a, b, TimeWindow(1e-9), 2) == pytest.approx(7.0**4, rel=1e-9)
    assert fp_filter_exact_2sp(a, b, TimeWindow(1e13), 2) == pytest.approx(
        fp_perfect_permsum_2sp(u, 2), rel=1e-6)
    with pytest.raises(TooLargeError):
        fp_filter_exact_2sp(a, b, TimeWindow(1.0), 3)


def test_filter_exact_flat_product_formula():
    D = 16
    a, b = flat_model(D, 2, 3)
    for T in (5.0, 50.0, 500.0):
        w = TimeWindow(T)
        closed = ((1 + (D - 1) * epsilon_h(a.eigenvalues, w).epsilon)
                  * (1 + (D - 1) * epsilon_h(b.eigenvalues, w).epsilon))
        assert fp_filter_exact_2sp(a, b, w, 1) == pytest.approx(closed, rel=1e-10)


def test_relative_stderr():
    est = fpm.FpEstimate(1, 2.0, 0.1, 10, 0, 1.0)
    assert est.relative_stderr == pytest.approx(0.05)
