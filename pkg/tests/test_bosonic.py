"""Bosonic analytics: moments, coefficient solver, estimator statistics,
expected MSE, Gaussian-random-variable baseline."""

from fractions import Fraction

import numpy as np
import pytest

from qcslab import bosonic
from qcslab.sampling import stream


def test_antinormal_moment_vacuum_normalization():
    assert bosonic.antinormal_moment(0, 0, 0.3 + 0.1j, 1.7) == 1.0


def test_antinormal_moment_closed_forms():
    g = 2.3
    a = 0.8 - 0.5j
    # <b b^dag> at alpha=0 equals G
    assert abs(bosonic.antinormal_moment(1, 1, 0.0, g) - g) < 1e-12
    # <b^dag 2> = (G-1) alpha^2
    assert abs(bosonic.antinormal_moment(2, 0, a, g) - (g - 1) * a**2) < 1e-12


def test_antinormal_moment_vs_statevector():
    worst = 0.0
    for gain in (1.2, 1.5):
        for alpha in (0.0, 0.5, 0.3 + 0.4j, 1.0):
            for n in range(4):
                for m in range(4):
                    if n + m > 4:
                        continue
                    sv = bosonic.antinormal_moment_statevector(n, m, alpha, gain, fock=36)
                    an = bosonic.antinormal_moment(n, m, alpha, gain)
                    worst = max(worst, abs(sv - an))
    assert worst < 1e-6


def test_xor_solver_matches_printed_table():
    w = bosonic.xor_target()
    for g in (1.5, 2.0, 5.0):
        c = bosonic.solve_qs_coefficients(w, g)
        assert abs(c.entries[0, 2] - 1j / (g - 1)) < 1e-12
        mask = np.ones((3, 3), dtype=bool)
        mask[0, 2] = mask[2, 0] = False
        assert np.abs(c.entries[mask]).max() < 1e-12


def test_zero_target_zero_coefficients():
    w = bosonic.HermitianCoeffMatrix(np.zeros((3, 3), dtype=complex))
    c = bosonic.solve_qs_coefficients(w, 2.0)
    assert np.abs(c.entries).max() == 0.0
    mean, var = bosonic.qs_estimator_stats(c, w, 2.0, 0.4 + 0.2j)
    assert mean == 0.0 and var == 0.0


def test_xor_finite_gain_variance():
    w = bosonic.xor_target()
    c = bosonic.solve_qs_coefficients(w, 2.0)
    _, var = bosonic.qs_estimator_stats(c, w, 2.0, 0.0)
    assert abs(var - 16.0) < 1e-9
    # printed finite-G formula at other alphas: 2/(G-1)^2 (2G^2 + 4G(G-1)|a|^2)
    for g in (1.5, 2.0, 4.0):
        cg = bosonic.solve_qs_coefficients(w, g)
        for a in (0.3, 0.7 - 0.2j):
            _, v = bosonic.qs_estimator_stats(cg, w, g, a)
            expect = 2 / (g - 1) ** 2 * (2 * g**2 + 4 * g * (g - 1) * abs(a) ** 2)
            assert abs(v - expect) < 1e-9 * expect


def test_xor_large_gain_forms_and_ratio():
    w = bosonic.xor_target()
    for a in (0.0, 0.5, 1.0 - 1.0j):
        _, vqs = bosonic.qs_estimator_stats(None, w, 2.0, a, large_gain=True)
        _, vqcs = bosonic.qcs_estimator_stats(w, 5.0, a, large_gain=True)
        assert abs(vqs - (4 + 8 * abs(a) ** 2)) < 1e-9
        assert abs(vqcs - (2 + 4 * abs(a) ** 2)) < 1e-9
        assert abs(vqs / vqcs - 2.0) < 1e-9


def test_qcs_vacuum_only_variance():
    w = bosonic.HermitianCoeffMatrix(np.zeros((2, 2), dtype=complex))
    mean, var = bosonic.qcs_estimator_stats(w, 4.0, 0.7)
    assert mean == 0.0
    assert abs(var - 1 / 32) < 1e-15


def test_qcs_variance_nonnegative_grid():
    rng = stream(17, 0)
    for _ in range(3):
        raw = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        w = bosonic.HermitianCoeffMatrix((raw + raw.conj().T) / 2)
        for ax in np.linspace(-1, 1, 5):
            for ay in np.linspace(-1, 1, 5):
                _, var = bosonic.qcs_estimator_stats(w, 3.0, ax + 1j * ay)
                assert var >= 0


def test_unbiasedness_random_targets():
    rng = stream(23, 1)
    grid = [ax + 1j * ay for ax in np.linspace(-1, 1, 7) for ay in np.linspace(-1, 1, 7)]
    for d in (2, 3, 4):
        raw = rng.normal(size=(d + 1, d + 1)) + 1j * rng.normal(size=(d + 1, d + 1))
        w = bosonic.HermitianCoeffMatrix((raw + raw.conj().T) / 2)
        c = bosonic.solve_qs_coefficients(w, 2.0)
        assert np.abs(c.entries - c.entries.conj().T).max() == 0.0
        for a in grid:
            target = float(w.target(np.array(a)))
            mean_qs, _ = bosonic.qs_estimator_stats(c, w, 2.0, a)
            mean_qcs, _ = bosonic.qcs_estimator_stats(w, 5.0, a)
            assert abs(mean_qs - target) < 1e-8 * max(1, abs(target))
            assert abs(mean_qcs - target) < 1e-12 * max(1, abs(target))


def test_sample_estimator_degenerate_and_mc():
    rng = stream(29, 2)
    out = bosonic.sample_estimator(np.array([2.0]), np.array([0.0]), rng, shots=100)
    assert np.all(out == 2.0)
    draws = bosonic.sample_estimator(np.zeros(10**5), np.full(10**5, 3.0), rng)
    assert abs(draws.var() - 3.0) < 0.15


def test_expected_mse_constant_variance():
    domain = bosonic.domain_grid_1d(points=101)
    var = np.full(101, 2.5)
    target = np.ones(101)
    assert abs(bosonic.expected_mse(var, target, domain) - 2.5) < 1e-12


def test_monomial_mse_grows_and_gap_widens():
    config = bosonic.AmplifierConfig(gain=2.0, g=10.0)
    domain = bosonic.domain_grid_1d(points=201)
    qs, qcs = [], []
    for m in range(1, 8):
        w = bosonic.monomial_1d_target(m)
        qs.append(bosonic.estimator_report(w, config, domain, "qs").expected_mse)
        qcs.append(bosonic.estimator_report(w, config, domain, "qcs").expected_mse)
    assert all(b > a for a, b in zip(qs, qs[1:]))
    assert all(b > a for a, b in zip(qcs, qcs[1:]))
    gaps = [a / b for a, b in zip(qs, qcs)]
    assert gaps[-1] > gaps[0]


def test_gaussian_baseline_table_symbolic():
    # Appendix-style coefficient table in v = sigma^2/S, exactly
    expected = {
        1: {1: {0: 1}},
        2: {0: {1: -1}, 2: {0: 1}},
        3: {1: {1: -3}, 3: {0: 1}},
        4: {0: {2: 3}, 2: {1: -6}, 4: {0: 1}},
        5: {1: {2: 15}, 3: {1: -10}, 5: {0: 1}},
        6: {0: {3: -15}, 2: {2: 45}, 4: {1: -15}, 6: {0: 1}},
    }
    for m, table in expected.items():
        sym = bosonic.gaussian_coefficients_symbolic(m)
        for n, poly in enumerate(sym):
            want = {p: Fraction(c) for p, c in table.get(n, {}).items()}
            assert poly == want, (m, n, poly)


def test_gaussian_baseline_numeric_rows():
    v = 0.25 / 8
    np.testing.assert_allclose(
        bosonic.gaussian_baseline_coefficients(2, 0.25, 8), [-v, 0, 1], atol=1e-15
    )
    np.testing.assert_allclose(
        bosonic.gaussian_baseline_coefficients(4, 0.25, 8),
        [3 * v**2, 0, -6 * v, 0, 1],
        atol=1e-15,
    )


def test_gaussian_variance_vs_quadrature_oracle():
    # independent Gauss-Hermite oracle for E[F] and Var[F]
    x, wq = np.polynomial.hermite_e.hermegauss(120)
    for sigma2, shots in ((0.5, 4), (1.0, 16)):
        v = sigma2 / shots
        for m in (2, 4, 6):
            coeffs = bosonic.gaussian_baseline_coefficients(m, sigma2, shots)
            for z in (0.0, 0.6, 1.0):
                f = np.polynomial.polynomial.polyval(z + np.sqrt(v) * x, coeffs)
                mean = (wq * f).sum() / wq.sum()
                var = (wq * f**2).sum() / wq.sum() - mean**2
                assert abs(mean - z**m) < 1e-12
                ana = bosonic.gaussian_estimator_variance(coeffs, z, sigma2, shots)
                assert abs(var - ana) < 1e-10 * max(1.0, ana)


def test_gaussian_baseline_monte_carlo():
    # low enough shot noise that the MC variance estimate concentrates
    rng = stream(31, 3)
    sigma2, shots, z = 0.25, 16, 0.6
    v = sigma2 / shots
    n_draws = 10**6
    zbar = z + np.sqrt(v) * rng.standard_normal(n_draws)
    for m in (2, 4, 6):
        coeffs = bosonic.gaussian_baseline_coefficients(m, sigma2, shots)
        est = np.polynomial.polynomial.polyval(zbar, coeffs)
        se = est.std() / np.sqrt(n_draws)
        assert abs(est.mean() - z**m) < 4 * se
        assert abs(est.var() - bosonic.gaussian_estimator_variance(coeffs, z, sigma2, shots)) \
            < 0.03 * est.var()


def test_degree_guard():
    with pytest.raises(ValueError):
        bosonic.gaussian_coefficients_symbolic(11)


def test_fit_target_coefficients_recovers_exact_polynomial():
    # regression on exact target values recovers W up to the ridge bias
    rng = stream(37, 4)
    w = bosonic.xor_target()
    pts = rng.uniform(-1, 1, size=(400, 2))
    alphas = pts[:, 0] + 1j * pts[:, 1]
    fit = bosonic.fit_target_coefficients(alphas, w.target(alphas), 2, ridge=1e-10)
    assert np.abs(fit.entries - w.entries).max() < 1e-6


def test_fit_target_coefficients_classifies_step_labels():
    # +-1 labels of the XOR sign function: the degree-2 LSQ surface separates
    # the bulk of the plane, with residual error near the axes only
    rng = stream(37, 5)
    pts = rng.uniform(-1, 1, size=(400, 2))
    alphas = pts[:, 0] + 1j * pts[:, 1]
    w = bosonic.xor_target()
    labels = np.where(w.target(alphas) < 0, -1.0, 1.0)
    fit = bosonic.fit_target_coefficients(alphas, labels, 2, ridge=1e-8)
    pred = np.sign(fit.target(alphas))
    assert np.mean(pred != labels) < 0.12


def test_coeff_matrix_roundtrip():
    w = bosonic.fixture_matrix("spirals_target_W.json")
    doc = w.to_document()
    back = bosonic.HermitianCoeffMatrix.from_document(doc)
    np.testing.assert_array_equal(back.entries, w.entries)


def test_gain_guard_and_near_unit_gain_solve():
    w = bosonic.xor_target()
    with pytest.raises(ValueError):
        bosonic.AmplifierConfig(gain=1.0)
    # equilibration keeps the system solvable arbitrarily close to unit gain
    c = bosonic.solve_qs_coefficients(w, 1.0 + 1e-6)
    assert abs(c.entries[0, 2] - 1j / 1e-6) < 1e-3 * 1e6
