"""Protocol builders, evaluation oracles, schedules, serialization."""

import json

import numpy as np
import pytest

from qcslab import gates as G
from qcslab import protocols as pr
from qcslab.sampling import stream


def explicit_matrix_chain(spec, params, u):
    """Slow dense-matrix oracle for eval_distribution."""
    psi = np.zeros(spec.layout.dimension, dtype=complex)
    psi[0] = 1.0
    for gate in spec.layers:
        if gate.kind == "sense":
            theta = np.asarray(u)[spec.schedule[gate.sense_slot]]
            mat = G.make_sensing_unitary(theta, spec.layout).entries
        else:
            mat, _ = pr._gate_matrix(gate, params, spec.layout)
        psi = mat @ psi
    return np.abs(psi) ** 2


def test_ramsey_closed_form_values():
    spec = pr.build_ramsey_qs(1)
    for theta, expect in ((np.pi / 8, 0.5), (3 * np.pi / 8, 1.0)):
        dist = pr.eval_distribution(spec, np.array([theta]))
        assert abs(dist.probs[1] - expect) < 1e-12


def test_ramsey_circuit_vs_formula_sweep():
    spec = pr.build_ramsey_qs(1)
    thetas = np.linspace(0, np.pi / 4, 200)
    probs = pr.forward_probs(spec, spec.zero_params(), thetas[:, None])
    assert np.abs(probs[:, 1] - pr.ramsey_response(thetas)).max() < 1e-10


def test_uncoupled_ramsey_marginals():
    spec = pr.build_ramsey_qs(2)
    dist = pr.eval_distribution(spec, np.array([np.pi / 8, np.pi / 8]))
    marg = pr.qubit_marginals(dist.probs[None, :], spec.layout)[0]
    np.testing.assert_allclose(marg, [0.5, 0.5], atol=1e-12)


def test_uncoupled_permutation_covariance():
    spec = pr.build_ramsey_qs(2)
    a = pr.qubit_marginals(
        pr.eval_distribution(spec, np.array([0.1, 0.6])).probs[None, :], spec.layout
    )[0]
    b = pr.qubit_marginals(
        pr.eval_distribution(spec, np.array([0.6, 0.1])).probs[None, :], spec.layout
    )[0]
    np.testing.assert_allclose(a, b[::-1], atol=1e-14)


def test_ramsey_m_guard():
    with pytest.raises(Exception):
        pr.build_ramsey_qs(8)


def test_qsp_zero_params_monotone_l1():
    spec = pr.build_qsp_qcs(1)
    thetas = np.linspace(0, np.pi / 4, 200)
    x = pr.forward_probs(spec, spec.zero_params(), thetas[:, None])[:, 1]
    assert np.all(np.diff(x) > 0)  # one-to-one on the domain


def test_qsp_composition_identity():
    # all processing angles zero: circuit equals H rz(L theta) H
    for layers in (1, 2, 5, 8):
        spec = pr.build_qsp_qcs(layers)
        thetas = np.linspace(0, np.pi / 4, 50)
        x = pr.forward_probs(spec, spec.zero_params(), thetas[:, None])[:, 1]
        assert np.abs(x - np.sin(layers * thetas) ** 2).max() < 1e-12


def test_qsp_zero_input_deterministic():
    for layers in (1, 3, 7):
        spec = pr.build_qsp_qcs(layers)
        dist = pr.eval_distribution(spec, np.array([0.0]))
        assert min(abs(dist.probs[1] - 0), abs(dist.probs[1] - 1)) < 1e-12


def test_qsp_parameter_count():
    assert pr.build_qsp_qcs(5).n_params == 2 * 5 + 2


def test_qnn_point_mass_at_zero():
    spec = pr.build_qnn_qcs(2, 2)
    dist = pr.eval_distribution(spec, np.zeros(2))
    assert np.sort(dist.probs)[-1] > 1 - 1e-12


def test_qnn_distribution_normalized():
    rng = stream(4, 0)
    spec = pr.build_qnn_qcs(2, 1)
    params = pr.init_params(spec, rng)
    dist = pr.eval_distribution(spec, np.array([0.3, 0.5]), params)
    assert abs(dist.probs.sum() - 1) < 1e-10
    assert dist.labels == ["00", "01", "10", "11"]


def test_qnn_parameter_arity():
    m, layers = 2, 3
    spec = pr.build_qnn_qcs(m, layers)
    assert spec.n_params == layers * (4**m + 2 * m) + 4**m


def test_eval_matches_matrix_chain_oracle():
    rng = stream(4, 1)
    spec = pr.build_qnn_qcs(2, 2)
    params = pr.init_params(spec, rng)
    u = np.array([0.31, 0.47])
    fast = pr.eval_distribution(spec, u, params).probs
    slow = explicit_matrix_chain(spec, params, u)
    assert np.abs(fast - slow).max() < 1e-12


def test_alternating_schedule():
    spec = pr.build_qnn_qcs(1, 4, "alternating")
    assert spec.n_inputs == 2
    np.testing.assert_array_equal(spec.schedule[:, 0], [0, 1, 0, 1])
    # layer phases alternate between the two components
    rng = stream(4, 2)
    params = pr.init_params(spec, rng)
    d1 = pr.eval_distribution(spec, np.array([0.2, 0.7]), params)
    d2 = pr.eval_distribution(spec, np.array([0.7, 0.2]), params)
    assert np.abs(d1.probs - d2.probs).max() > 1e-3  # order matters


def test_explicit_schedule_arity_check():
    with pytest.raises(ValueError):
        pr.build_qnn_qcs(2, 3, np.zeros((2, 2), dtype=int))


def test_schedule_static_vs_kron_sense():
    # sensing slot of a static 2-qubit protocol equals kron of rz's
    spec = pr.build_qnn_qcs(2, 1)
    u = np.array([0.25, 0.5])
    diag = G.sensing_phases(u, spec.layout)
    oracle = np.diag(np.kron(G.rz_matrix(0.25), G.rz_matrix(0.5)))
    assert np.abs(diag - oracle).max() < 1e-14


def test_sensing_period_bookkeeping():
    spec = pr.build_qnn_qcs(2, 8)
    shots = 4
    assert spec.n_layers * shots == 32  # N = L x S accounting used by the harness


def test_serialization_roundtrip():
    rng = stream(4, 3)
    spec = pr.build_qnn_qcs(2, 2, "static")
    params = pr.init_params(spec, rng)
    doc = json.loads(json.dumps(pr.spec_to_document(spec, params)))
    spec2, params2 = pr.spec_from_document(doc)
    np.testing.assert_array_equal(params, params2)
    assert pr.spec_to_document(spec2, params2) == pr.spec_to_document(spec, params)
    u = np.array([0.3, 0.1])
    np.testing.assert_array_equal(
        pr.eval_distribution(spec, u, params).probs,
        pr.eval_distribution(spec2, u, params2).probs,
    )


def test_haar_init_gives_unitary_block():
    rng = stream(4, 4)
    coeffs = pr.haar_log_coefficients(2, rng)
    from qcslab.hilbert import HilbertLayout

    u = G.make_pauli_string_unitary(coeffs, HilbertLayout(qubit_count=2))
    assert np.abs(u.entries.conj().T @ u.entries - np.eye(4)).max() < 1e-9


def test_arity_mismatch_raises():
    spec = pr.build_qsp_qcs(2)
    with pytest.raises(ValueError):
        pr.eval_distribution(spec, np.array([0.1, 0.2]))
