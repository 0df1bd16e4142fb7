"""Hybrid qubit-cavity protocol and the TMS conventional baseline."""

import numpy as np
import pytest

from qcslab import hybrid as hy
from qcslab import training as tr
from qcslab.sampling import stream


def test_parameter_count():
    assert hy.build_hybrid_qcs(1).n_params == 8
    assert hy.build_hybrid_qcs(16).n_params == 83


def test_zero_params_qubit_untouched():
    model = hy.HybridModel(hy.build_hybrid_qcs(2, fock_levels=40))
    for alpha in (0.0, 0.5 + 0.3j, -1.2j):
        pf = model.probs(np.zeros(13), np.array([[alpha.real, alpha.imag]]))
        assert model.excitation(pf)[0] < 1e-24


def test_reflection_identity_random_params():
    rng = stream(41, 0)
    model = hy.HybridModel(hy.build_hybrid_qcs(4, fock_levels=40))
    for _ in range(5):
        params = model.init_params(rng)
        pf = model.probs(params, np.array([[0.0, 0.0]]))
        assert model.excitation(pf)[0] < 1e-12


def test_coherent_tail_leakage_oracle():
    # D=1, zero params: cavity ends in |alpha|; top-two-level mass matches the
    # Poisson tail and stays below 1e-12 for |alpha| <= 2 at cutoff 70
    from math import factorial

    model = hy.HybridModel(hy.build_hybrid_qcs(1, fock_levels=70))
    for a in (0.5, 1.5, 2.0):
        pf = model.probs(np.zeros(8), np.array([[a, 0.0]]))
        leak = model.leakage(pf)[0]
        tail = sum(np.exp(-a * a) * (a * a) ** n / factorial(n) for n in (68, 69))
        assert abs(leak - tail) < 1e-15 + 1e-6 * tail
        assert leak < 1e-12


def test_truncation_report_flags():
    rep = hy.TruncationReport(leakage=2e-3, mean_photon=1.0, cutoff_used=70)
    assert not rep.clean
    rep2 = hy.TruncationReport(leakage=5e-4, mean_photon=1.0, cutoff_used=70,
                               prob_drift=1e-8)
    assert rep2.clean


def test_check_truncation_zero_params():
    spec = hy.build_hybrid_qcs(1, fock_levels=70)
    grid = (np.linspace(-2, 2, 3)[:, None] + 1j * np.linspace(-2, 2, 3)[None, :]).ravel()
    rep = hy.check_truncation(spec, np.zeros(8), grid)
    assert rep.leakage < 1e-12
    assert rep.prob_drift < 1e-12
    assert rep.clean


def test_hybrid_adjoint_vs_central_difference():
    rng = stream(41, 1)
    spec = hy.build_hybrid_qcs(2, fock_levels=30)
    model = hy.HybridModel(spec)
    params = model.init_params(rng)
    u = rng.uniform(-0.8, 0.8, (3, 2))
    v = rng.standard_normal((3, model.n_out))
    ga = model.adjoint(params, u, v)
    gc = tr.grad_circuit(model, params, u, v, mode="central_difference")
    assert np.abs(ga - gc).max() < 1e-6 * np.abs(gc).max()


def test_hybrid_shift_rules_all_fallback():
    model = hy.HybridModel(hy.build_hybrid_qcs(2, fock_levels=20))
    assert all(kind == "cd" for kind, _ in model.shift_rules())


def test_expected_single_shot_error_balance():
    model = hy.HybridModel(hy.build_hybrid_qcs(1, fock_levels=30))
    inputs = np.array([[0.3, 0.0], [0.5, 0.1]])
    labels = np.array([1, 2])
    err = hy.expected_single_shot_error(model, np.zeros(8), inputs, labels)
    # zero params: excitation 0 everywhere: class 1 rows always right, class 2 wrong
    assert abs(err - 0.5) < 1e-12


# -- TMS baseline ---------------------------------------------------------------


def test_tms_zero_squeeze_vacuum_variance():
    base = hy.build_tms_qs(0.0)
    st = base.statevector_stats(0.7 + 0.3j, fock_levels=25)
    assert abs(st["x_a"][0] - 0.7) < 1e-9
    assert abs(st["p_b"][0] - 0.3) < 1e-9
    assert abs(st["x_a"][1] - 0.5) < 1e-8
    assert abs(st["p_b"][1] - 0.5) < 1e-8


def test_tms_squeezed_below_vacuum():
    base = hy.build_tms_qs(0.5)
    st = base.statevector_stats(0.2 - 0.4j, fock_levels=30)
    expect = np.exp(-1.0) / 2
    assert st["x_a"][1] < 0.5 and st["p_b"][1] < 0.5
    assert abs(st["x_a"][1] - expect) < 1e-6
    assert abs(st["p_b"][1] - expect) < 1e-6


def test_tms_unbiased_on_grid():
    base = hy.build_tms_qs(0.4)
    for ax in np.linspace(-1, 1, 3):
        for ay in np.linspace(-1, 1, 3):
            st = base.statevector_stats(ax + 1j * ay, fock_levels=40)
            assert abs(st["x_a"][0] - ax) < 1e-8
            assert abs(st["p_b"][0] - ay) < 1e-8


def test_photon_matching():
    base = hy.match_photon_number(1.7)
    assert abs(base.mean_photon - 1.7) < 1e-12
    assert hy.match_photon_number(0.0).squeeze == 0.0


def test_tms_sampling_statistics():
    rng = stream(41, 2)
    base = hy.build_tms_qs(0.6)
    draws = base.sample(np.full(20000, 0.5 + 0.2j), 1, rng)
    assert abs(draws[:, 0].mean() - 0.5) < 0.01
    assert abs(draws[:, 0].var() - base.quadrature_variance) < 0.01


def test_model_serialization_refuses_dirty(tmp_path):
    spec = hy.build_hybrid_qcs(1, fock_levels=30)
    params = np.zeros(8)
    clean = hy.TruncationReport(1e-5, 0.2, 30, 1e-9)
    path = tmp_path / "model.json"
    hy.save_hybrid_model(path, spec, params, clean)
    spec2, params2, rep2 = hy.load_hybrid_model(path)
    assert spec2 == spec
    np.testing.assert_array_equal(params2, params)
    dirty = hy.TruncationReport(2e-3, 4.0, 30, 1e-3)
    hy.save_hybrid_model(path, spec, params, dirty)
    with pytest.raises(ValueError):
        hy.load_hybrid_model(path)


def test_depth_guard():
    with pytest.raises(ValueError):
        hy.build_hybrid_qcs(0)
