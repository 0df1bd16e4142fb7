"""Bayes / Gaussian classifiers and sign thresholding."""

import numpy as np
import pytest

from qcslab import classifiers as cl
from qcslab import protocols as pr
from qcslab.sampling import stream

RAMSEY = pr.ramsey_response


def flat_response(theta):
    return 0.5 * np.ones_like(np.asarray(theta, dtype=float))


def test_equal_delta_task_structure():
    task = cl.equal_delta_task(3)
    delta = np.pi / 24
    for r, (lo, hi) in enumerate(task.intervals(1)):
        assert abs(lo - 2 * r * delta) < 1e-15 and abs(hi - (2 * r + 1) * delta) < 1e-15
    assert abs(task.delta - delta) < 1e-15


def test_region_task_requires_equal_totals():
    with pytest.raises(ValueError):
        cl.RegionTask1D(1, (((0.0, 0.3),), ((0.3, np.pi / 4),)))


def test_bayes_classify_low_count_low_theta():
    # monotone response, single split at pi/8: Y=0 from a single shot favors class 1.
    task = cl.equal_delta_task(1)
    assert cl.bayes_classify(0, 1, task, RAMSEY) == 1
    assert cl.bayes_classify(1, 1, task, RAMSEY) == 2


def test_bayes_classify_tie_goes_to_class_one():
    task = cl.equal_delta_task(2)
    # uninformative response: all masses equal; every count ties -> class 1
    assert cl.bayes_classify(3, 6, task, flat_response) == 1


def test_bayes_error_uninformative_is_half():
    task = cl.equal_delta_task(4)
    assert abs(cl.bayes_error(8, task, flat_response) - 0.5) < 1e-12


def test_bayes_error_monotone_in_shots():
    task = cl.equal_delta_task(6)
    errs = [cl.bayes_error(2**k, task, RAMSEY) for k in range(11)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    assert 0.45 < errs[0] < 0.5  # single shot barely below random guessing


def test_bayes_error_scaling_invariance():
    # argmax decisions are invariant under scaling both joint masses
    task = cl.equal_delta_task(2)
    masses = cl._class_masses(5, task, RAMSEY)
    pred1 = masses[0] >= masses[1]
    pred2 = (7.3 * masses[0]) >= (7.3 * masses[1])
    assert np.array_equal(pred1, pred2)


def test_gaussian_formula_asymptote():
    for r in (1, 2, 3):
        val = cl.gaussian_error_formula(r, 64, asymptotic=True)
        assert abs(val - 0.063 * (2 * r - 1)) < 0.02 * 0.063 * (2 * r - 1)


def test_gaussian_formula_vanishes_at_large_s():
    assert cl.gaussian_error_formula(2, 10**8) < 1e-3


def test_gaussian_formula_regime_warning():
    with pytest.warns(UserWarning):
        cl.gaussian_error_formula(6, 4)


def test_gaussian_formula_vs_bayes_agreement():
    for r in (1, 2, 3):
        task = cl.equal_delta_task(r)
        for s in (16, 64, 256, 1024):
            eb = cl.bayes_error(s, task, RAMSEY)
            eg = cl.gaussian_error_formula(r, s)
            assert abs(eg - eb) < 0.10 * eb, (r, s, eb, eg)


def test_gaussian_agreement_improves_with_shots():
    for r in (1, 2, 3):
        task = cl.equal_delta_task(r)
        rel = [
            abs(cl.gaussian_error_formula(r, s) - cl.bayes_error(s, task, RAMSEY))
            / cl.bayes_error(s, task, RAMSEY)
            for s in (16, 64, 256, 1024)
        ]
        assert all(b <= a + 1e-3 for a, b in zip(rel, rel[1:]))


def test_gaussian_formula_vs_monte_carlo_oracle():
    rng = stream(7, 1)
    mc = cl.gaussian_classifier_mc(2, 64, 10**6, rng)
    formula = cl.gaussian_error_formula(2, 64)
    se = np.sqrt(mc * (1 - mc) / 10**6)
    assert abs(mc - formula) < 3 * se


def test_bayes_error_vs_classifier_monte_carlo():
    # classifier decisions replayed against sampled (theta, Y) pairs
    task = cl.equal_delta_task(2)
    shots = 8
    masses = cl._class_masses(shots, task, RAMSEY)
    decisions = np.where(masses[0] >= masses[1], 1, 2)
    rng = stream(19, 2)
    n = 10**6
    labels = rng.integers(1, 3, size=n)
    thetas = np.empty(n)
    for j in (1, 2):
        arr = task.intervals(j)
        mask = labels == j
        pick = rng.integers(0, task.regions, size=mask.sum())
        widths = arr[pick, 1] - arr[pick, 0]
        thetas[mask] = arr[pick, 0] + rng.random(mask.sum()) * widths
    ys = rng.binomial(shots, RAMSEY(thetas))
    err_mc = float(np.mean(decisions[ys] != labels))
    err_exact = cl.bayes_error(shots, task, RAMSEY)
    se = np.sqrt(err_exact * (1 - err_exact) / n)
    assert abs(err_mc - err_exact) < 3 * se


def test_threshold_classify():
    assert cl.threshold_classify(-3.2) == 1
    assert cl.threshold_classify(0.0001) == 2
    assert cl.threshold_classify(0.0) == 2


def test_task_serialization_roundtrip():
    task = cl.equal_delta_task(3)
    back = cl.RegionTask1D.from_document(task.to_document())
    np.testing.assert_array_equal(back.intervals(1), task.intervals(1))
    np.testing.assert_array_equal(back.intervals(2), task.intervals(2))
