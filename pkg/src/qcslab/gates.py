"""Operator constructors: qubit gates, sensing unitaries, Pauli-string
exponentials, and truncated bosonic operators.

Angle conventions (documented per gate to avoid silent factor-of-2 drift):

* ``rz(theta)``  = exp{-i theta sigma_z}              (full angle; sensing convention)
* ``rx(phi)``    = exp{-i (phi/2) sigma_x}            (half angle)
* ``rot(Omega, theta, phi)`` = exp{-i (Omega/2) n.sigma} with axis
  n = (sin theta sin phi, sin theta cos phi, cos theta)
* ``hadamard`` carries a global -i phase: H = (-i/sqrt 2) [[1, 1], [1, -1]]
"""

from __future__ import annotations

import numpy as np

from .hilbert import HilbertLayout, LayoutError, OperatorMatrix

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
HADAMARD = (-1j / np.sqrt(2)) * np.array([[1, 1], [1, -1]], dtype=np.complex128)

LEAKAGE_THRESHOLD = 1e-3


def _check_finite(*angles: float) -> None:
    for a in angles:
        if not np.isfinite(a):
            raise ValueError(f"non-finite angle {a!r}")


def rz_matrix(theta: float) -> np.ndarray:
    _check_finite(theta)
    return np.diag(np.exp(np.array([-1j * theta, 1j * theta])))


def rx_matrix(phi: float) -> np.ndarray:
    _check_finite(phi)
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def rotation_axis(theta_axis: float, phi_axis: float) -> np.ndarray:
    return np.array(
        [
            np.sin(theta_axis) * np.sin(phi_axis),
            np.sin(theta_axis) * np.cos(phi_axis),
            np.cos(theta_axis),
        ]
    )


def rot_matrix(omega: float, theta_axis: float, phi_axis: float) -> np.ndarray:
    """General rotation exp{-i (Omega/2) n.sigma} around a trainable axis."""
    _check_finite(omega, theta_axis, phi_axis)
    n = rotation_axis(theta_axis, phi_axis)
    gen = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    return np.cos(omega / 2) * np.eye(2) - 1j * np.sin(omega / 2) * gen


def embed_qubit_op(u2: np.ndarray, target: int, layout: HilbertLayout) -> np.ndarray:
    """Embed a single-qubit operator via identity tensor factors."""
    if target < 0 or target >= layout.qubit_count:
        raise LayoutError(f"qubit index {target} out of range for {layout.qubit_count} qubits")
    left = np.eye(2**target)
    right = np.eye(2 ** (layout.qubit_count - 1 - target) * layout.fock_dim**layout.fock_modes)
    return np.kron(np.kron(left, u2), right)


def make_qubit_gate(kind: str, target: int, layout: HilbertLayout, *args: float) -> OperatorMatrix:
    """Single-qubit gate embedded in the full layout.

    kind: 'hadamard' | 'rz' | 'rx' | 'general_rotation' (args = angles).
    """
    if kind == "hadamard":
        u2 = HADAMARD
    elif kind == "rz":
        u2 = rz_matrix(*args)
    elif kind == "rx":
        u2 = rx_matrix(*args)
    elif kind == "general_rotation":
        u2 = rot_matrix(*args)
    else:
        raise ValueError(f"unknown qubit gate kind {kind!r}")
    return OperatorMatrix(layout, embed_qubit_op(u2, target, layout), unitary=True)


def sensing_phases(phases: np.ndarray, layout: HilbertLayout) -> np.ndarray:
    """Diagonal of the sensing unitary (x)_m exp{-i theta_m sigma_z_m}."""
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (layout.qubit_count,):
        raise LayoutError(
            f"expected {layout.qubit_count} sensing phases, got shape {phases.shape}"
        )
    dim = layout.dimension
    idx = np.arange(dim)
    total = np.zeros(dim)
    for m in range(layout.qubit_count):
        bit = (idx // (layout.fock_dim**layout.fock_modes) >> (layout.qubit_count - 1 - m)) & 1
        total += phases[m] * np.where(bit == 0, -1.0, 1.0)
    return np.exp(1j * total)


def make_sensing_unitary(phases: np.ndarray, layout: HilbertLayout) -> OperatorMatrix:
    """Tensor product of full-angle z rotations, one per qubit."""
    return OperatorMatrix(layout, np.diag(sensing_phases(phases, layout)), unitary=True)


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------
# String n is read as base-4 digits, qubit 0 the most significant digit:
# 0 = I, 1 = X, 2 = Y, 3 = Z.  P_n|i> = phase_n(i) |i ^ xmask_n>.


def pauli_masks(n: int, qubits: int) -> tuple[int, int, int]:
    """(xmask, ymask, zmask) of Pauli string n over `qubits` qubits."""
    x = y = z = 0
    for m in range(qubits):
        digit = (n // 4 ** (qubits - 1 - m)) % 4
        bit = 1 << (qubits - 1 - m)
        if digit == 1:
            x |= bit
        elif digit == 2:
            x |= bit
            y |= bit
        elif digit == 3:
            z |= bit
    return x, y, z


def pauli_action(n: int, qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Columns of P_n: (permutation, phase) with P_n[perm[i], i] = phase[i]."""
    x, y, z = pauli_masks(n, qubits)
    idx = np.arange(2**qubits)
    perm = idx ^ x
    phase = np.ones(2**qubits, dtype=np.complex128)
    for m in range(qubits):
        bit = 1 << (qubits - 1 - m)
        bits = (idx & bit) != 0
        if y & bit:
            phase *= np.where(bits, -1j, 1j)
        if z & bit:
            phase *= np.where(bits, -1.0, 1.0)
    return perm, phase


def pauli_string_generator(coeffs: np.ndarray, qubits: int) -> np.ndarray:
    """Hermitian G = sum_n c_n P_n for real coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (4**qubits,):
        raise ValueError(f"expected {4 ** qubits} coefficients, got {coeffs.shape}")
    dim = 2**qubits
    g = np.zeros((dim, dim), dtype=np.complex128)
    idx = np.arange(dim)
    for n in np.nonzero(coeffs)[0]:
        perm, phase = pauli_action(int(n), qubits)
        g[perm, idx] += coeffs[n] * phase
    return g


def pauli_overlaps(matrix: np.ndarray, qubits: int) -> np.ndarray:
    """tr(P_n M) / 2^M for every string n (inverse of pauli_string_generator)."""
    dim = 2**qubits
    idx = np.arange(dim)
    out = np.empty(4**qubits, dtype=np.complex128)
    for n in range(4**qubits):
        perm, phase = pauli_action(n, qubits)
        # tr(P_n M) = sum_i <i|P_n M|i> = sum_i phase(i) M[perm[i], i] with
        # P_n read as rows: <i|P_n = (P_n^T)_i. P_n[perm, idx] = phase, so
        # <perm[i]|P_n|i> = phase[i] and tr(P_n M) = sum_i P_n[i, j] M[j, i].
        out[n] = (phase * matrix[idx, perm]).sum() / dim
    return out


def make_pauli_string_unitary(coeffs: np.ndarray, layout: HilbertLayout) -> OperatorMatrix:
    """exp{-i sum_n c_n P_n} via Hermitian eigendecomposition."""
    if layout.qubit_count > 7:
        raise LayoutError("Pauli-string blocks limited to 7 qubits")
    if layout.has_boson:
        raise LayoutError("Pauli-string blocks act on qubit-only layouts")
    g = pauli_string_generator(coeffs, layout.qubit_count)
    vals, vecs = np.linalg.eigh(g)
    u = (vecs * np.exp(-1j * vals)) @ vecs.conj().T
    return OperatorMatrix(layout, u, unitary=True)


# ---------------------------------------------------------------------------
# Bosonic operators on the truncated Fock space
# ---------------------------------------------------------------------------


def annihilator(fock_dim: int) -> np.ndarray:
    a = np.zeros((fock_dim, fock_dim), dtype=np.complex128)
    n = np.arange(1, fock_dim)
    a[n - 1, n] = np.sqrt(n)
    return a


def quadrature_q(fock_dim: int) -> np.ndarray:
    a = annihilator(fock_dim)
    return (a + a.conj().T) / np.sqrt(2)


def quadrature_p(fock_dim: int) -> np.ndarray:
    a = annihilator(fock_dim)
    return -1j * (a - a.conj().T) / np.sqrt(2)


def _expm_hermitian(h: np.ndarray, scale: complex = -1j) -> np.ndarray:
    """exp(scale * h) for Hermitian h, exact-unitary by phase reassembly."""
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(scale * vals)) @ vecs.conj().T


def displacement_matrix(alpha: complex, fock_dim: int) -> np.ndarray:
    """exp{alpha a^dag - alpha* a} by exponentiating the truncated generator."""
    a = annihilator(fock_dim)
    gen = 1j * (alpha * a.conj().T - np.conj(alpha) * a)  # Hermitian
    return _expm_hermitian(gen)


def conditional_displacement_matrix(
    x: float, y: float, layout: HilbertLayout, chi_d: float = 1.0
) -> np.ndarray:
    """exp{-i chi_d sigma_z (x q + y p)} on a 1-qubit (x) cavity layout."""
    if layout.qubit_count != 1 or not layout.has_boson or layout.fock_modes != 1:
        raise LayoutError("conditional displacement needs a 1-qubit x cavity layout")
    f = layout.fock_dim
    h = chi_d * (x * quadrature_q(f) + y * quadrature_p(f))
    vals, vecs = np.linalg.eigh(h)
    up = (vecs * np.exp(-1j * vals)) @ vecs.conj().T
    down = (vecs * np.exp(1j * vals)) @ vecs.conj().T
    out = np.zeros((2 * f, 2 * f), dtype=np.complex128)
    out[:f, :f] = up  # qubit |0> block: sigma_z eigenvalue +1
    out[f:, f:] = down
    return out


def two_mode_squeeze_matrix(chi: float, fock_dim: int) -> np.ndarray:
    """exp{chi (a^dag b^dag - a b)} on the two-mode truncated space."""
    a1 = np.kron(annihilator(fock_dim), np.eye(fock_dim))
    b1 = np.kron(np.eye(fock_dim), annihilator(fock_dim))
    gen = 1j * chi * (a1.conj().T @ b1.conj().T - a1 @ b1)
    return _expm_hermitian(gen)


def beam_splitter_matrix(fock_dim: int) -> np.ndarray:
    """Balanced beam splitter with a -> (a - b)/sqrt2, b -> (a + b)/sqrt2,
    so X_a - X_b and P_a + P_b land on the measured output quadratures."""
    a1 = np.kron(annihilator(fock_dim), np.eye(fock_dim))
    b1 = np.kron(np.eye(fock_dim), annihilator(fock_dim))
    gen = 1j * (np.pi / 4) * (a1 @ b1.conj().T - a1.conj().T @ b1)
    return _expm_hermitian(gen)


def make_bosonic_operator(kind: str, layout: HilbertLayout, *args) -> OperatorMatrix:
    """Bosonic operator family.

    kind: 'annihilate' | 'create' | 'number' | 'q' | 'p' | 'displace' |
    'conditional_displace' | 'two_mode_squeeze' | 'beam_splitter'.
    Single-mode kinds act on the bosonic mode of any single-mode layout.
    The two-mode kinds require a two-mode bosonic layout.
    """
    if not layout.has_boson:
        raise LayoutError(f"bosonic operator {kind!r} requires fock_levels >= 2")
    f = layout.fock_dim
    qdim = 2**layout.qubit_count

    if kind in ("two_mode_squeeze", "beam_splitter"):
        if layout.fock_modes != 2:
            raise LayoutError(f"{kind} requires a two-mode bosonic layout")
        mat = (
            two_mode_squeeze_matrix(args[0], f)
            if kind == "two_mode_squeeze"
            else beam_splitter_matrix(f)
        )
        dev = np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])).max()
        return OperatorMatrix(
            layout, mat, unitary=dev < 1e-6, meta={"unitary_deviation": float(dev)}
        )

    if kind == "conditional_displace":
        x, y = args[0], args[1]
        chi_d = args[2] if len(args) > 2 else 1.0
        mat = conditional_displacement_matrix(x, y, layout, chi_d)
        return OperatorMatrix(layout, mat, unitary=True)

    if kind == "annihilate":
        single, flags = annihilator(f), {}
    elif kind == "create":
        single, flags = annihilator(f).conj().T, {}
    elif kind == "number":
        single, flags = annihilator(f).conj().T @ annihilator(f), {"hermitian": True}
    elif kind == "q":
        single, flags = quadrature_q(f), {"hermitian": True}
    elif kind == "p":
        single, flags = quadrature_p(f), {"hermitian": True}
    elif kind == "displace":
        single = displacement_matrix(args[0], f)
        dev = float(np.abs(single.conj().T @ single - np.eye(f)).max())
        flags = {"unitary": dev < 1e-6, "meta": {"unitary_deviation": dev}}
    else:
        raise ValueError(f"unknown bosonic operator kind {kind!r}")

    full = np.kron(np.eye(qdim), single)
    return OperatorMatrix(layout, full, **flags)
