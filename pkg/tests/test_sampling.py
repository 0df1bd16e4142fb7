"""Finite-shot sampling: determinism, variance law, binomial pmf agreement."""

import numpy as np
from scipy import stats

from qcslab import sampling as sp


def test_point_mass_all_identical():
    rng = sp.stream(1, 2)
    rec = sp.sample(np.array([0.0, 1.0, 0.0]), 50, rng)
    assert np.all(rec.raw == 1)
    np.testing.assert_array_equal(rec.xbar, [0.0, 1.0, 0.0])


def test_single_shot_is_indicator():
    rng = sp.stream(3, 4)
    rec = sp.sample(np.array([0.4, 0.6]), 1, rng)
    assert sorted(rec.xbar.tolist()) == [0.0, 1.0]


def test_half_half_concentration():
    rng = sp.stream(5, 6)
    rec = sp.sample(np.array([0.5, 0.5]), 10**5, rng)
    assert abs(rec.xbar[0] - 0.5) < 0.01


def test_determinism_byte_for_byte():
    a = sp.sample(np.array([0.3, 0.7]), 1000, sp.stream(9, 1, 2))
    b = sp.sample(np.array([0.3, 0.7]), 1000, sp.stream(9, 1, 2))
    assert np.array_equal(a.raw, b.raw)
    assert a.raw.tobytes() == b.raw.tobytes()


def test_sample_count_degenerate():
    assert sp.sample_count(0.0, 17, sp.stream(1, 1)) == 0
    assert sp.sample_count(1.0, 17, sp.stream(1, 1)) == 17


def test_sample_count_matches_binomial_pmf():
    # empirical pmf over many runs vs exact Binomial(8, 0.3), TV < 0.005
    rng = sp.stream(11, 0)
    n_runs, s, x = 200_000, 8, 0.3
    counts = np.zeros(s + 1)
    draws = rng.random((n_runs, s)) < x
    ys = draws.sum(axis=1)
    for y in ys:
        counts[y] += 1
    emp = counts / n_runs
    exact = stats.binom.pmf(np.arange(s + 1), s, x)
    assert 0.5 * np.abs(emp - exact).sum() < 0.005
    # and the sampler itself follows the same law
    ys2 = np.array([sp.sample_count(x, s, sp.stream(12, i)) for i in range(20_000)])
    emp2 = np.bincount(ys2, minlength=s + 1) / len(ys2)
    assert 0.5 * np.abs(emp2 - exact).sum() < 0.01


def test_variance_law():
    for p in (0.1, 0.5, 0.9):
        xbars = []
        for i in range(10_000):
            rec = sp.sample(np.array([1 - p, p]), 16, sp.stream(13, i))
            xbars.append(rec.xbar[1])
        var = np.var(xbars)
        assert abs(var - p * (1 - p) / 16) < 0.1 * p * (1 - p) / 16


def test_categorical_tie_rule_first_index_at_cdf():
    # u exactly at a cdf boundary goes to the first index with cdf >= u
    probs = np.array([0.25, 0.25, 0.5])
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, 0.25, side="left")
    assert idx == 0


def test_binomial_variance_helper():
    xbar = np.array([0.25, 0.75])
    np.testing.assert_allclose(sp.binomial_variance(xbar, 10), xbar * (1 - xbar) / 10)
