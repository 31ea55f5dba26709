import numpy as np
import pytest

from kdesign.errors import InvalidDimensionError
from kdesign.hamiltonians import sample_gue
from kdesign.leakage import loglog_fit
from kdesign.rng import stream
from kdesign.temporal import TimeWindow, epsilon_h, filter_value, heisenberg_time, sample_times


def test_window_must_be_positive():
    for bad in (0.0, -1.0, np.inf, np.nan):
        with pytest.raises(ValueError):
            TimeWindow(bad)


def test_sample_times_uniform_mean():
    t = sample_times(TimeWindow(1.0), 100_000, stream(1, "t"))
    assert abs(t.mean() - 0.5) < 5 * np.sqrt(1 / 12 / t.size)
    assert t.min() >= 0 and t.max() <= 1


def test_sample_times_deterministic():
    a = sample_times(TimeWindow(3.0), 50, stream(2, "t"))
    b = sample_times(TimeWindow(3.0), 50, stream(2, "t"))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        sample_times(TimeWindow(1.0), 0, stream(2, "t"))


def test_filter_values():
    w = TimeWindow(1.0)
    assert filter_value(0.0, w) == 1.0
    assert filter_value(2 * np.pi, w) == pytest.approx(0.0, abs=1e-30)
    assert filter_value(np.pi, w) == pytest.approx((2 / np.pi) ** 2, rel=1e-12)
    assert abs(filter_value(1e-12, w) - 1) < 1e-8
    assert abs(filter_value(-1e-12, w) - 1) < 1e-8


def test_filter_taylor_branch_matches_ratio():
    w = TimeWindow(2.0)
    x = np.array([0.99e-4, 1.01e-4])  # dE T / 2 on either side of the switch
    v = filter_value(x, w)
    exact = (np.sin(x * 1.0) / (x * 1.0)) ** 2
    np.testing.assert_allclose(v, exact, rtol=1e-12)


def test_filter_vectorized_even():
    w = TimeWindow(7.0)
    x = np.linspace(-3, 3, 101)
    np.testing.assert_array_equal(filter_value(x, w), filter_value(-x, w))
    assert np.all((filter_value(x, w) >= 0) & (filter_value(x, w) <= 1))


def test_epsilon_limits():
    e = np.linalg.eigvalsh(sample_gue(20, 1).matrix)
    assert epsilon_h(e, TimeWindow(1e-9)).epsilon == pytest.approx(1.0, abs=1e-12)
    assert epsilon_h(np.zeros(5), TimeWindow(100.0)).epsilon == 1.0
    with pytest.raises(InvalidDimensionError):
        epsilon_h([1.0], TimeWindow(1.0))


def test_epsilon_shift_invariant():
    e = np.linalg.eigvalsh(sample_gue(30, 2).matrix)
    w = TimeWindow(50.0)
    assert epsilon_h(e + 3.7, w).epsilon == pytest.approx(epsilon_h(e, w).epsilon, rel=1e-9)


def test_epsilon_decreases_past_heisenberg_time():
    e = np.linalg.eigvalsh(sample_gue(40, 3).matrix)
    t_h = heisenberg_time(e)
    for T in t_h * np.array([1, 3, 10, 100]):
        assert epsilon_h(e, TimeWindow(10 * T)).epsilon < epsilon_h(e, TimeWindow(T)).epsilon


def test_epsilon_inverse_square_scaling():
    e = np.linalg.eigvalsh(sample_gue(100, 0).matrix)
    T = np.logspace(3, 5, 17)
    eps = [epsilon_h(e, TimeWindow(t)).epsilon for t in T]
    slope, _, _ = loglog_fit(T, eps)
    assert abs(slope + 2.0) < 0.3


def test_epsilon_brute_force():
    e = np.array([0.0, 0.3, 1.1])
    w = TimeWindow(4.0)
    pairs = [(a, b) for a in range(3) for b in range(3) if a != b]
    brute = np.mean([np.sinc((e[a] - e[b]) * 4.0 / 2 / np.pi) ** 2 for a, b in pairs])
    assert epsilon_h(e, w).epsilon == pytest.approx(brute, rel=1e-12)


def test_heisenberg_time():
    assert heisenberg_time(np.array([0.0, 1.0, 2.0, 4.0])) == 1.0
    assert heisenberg_time(np.zeros(3)) == np.inf
