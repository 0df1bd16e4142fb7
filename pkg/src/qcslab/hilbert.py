"""Composite Hilbert-space layouts, statevectors, and dense operators.

Conventions fixed here and used everywhere else:

* qubits are big-endian: qubit 0 is the most significant bit of the
  computational-basis index;
* an optional bosonic mode (Fock-truncated) occupies the least significant
  block of the index, so ``index = qubit_bits * fock_dim + fock_level``;
* two bosonic modes (no qubits) are supported only for the amplifier
  baselines, with mode a major and mode b minor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DIMENSION = 2**20

NORM_TOL = 1e-10
UNITARY_TOL = 1e-9
HERMITIAN_TOL = 1e-12
NORM_DRIFT_TOL = 1e-8


class LayoutError(ValueError):
    pass


class NormDriftError(RuntimeError):
    """Raised when a state loses norm, signalling truncation leakage or a bad op."""


@dataclass(frozen=True)
class HilbertLayout:
    """Shape of a composite qubit (x) Fock space."""

    qubit_count: int = 0
    fock_levels: int = 0
    fock_modes: int = 1

    def __post_init__(self):
        if self.qubit_count < 0 or self.fock_levels < 0:
            raise LayoutError("qubit_count and fock_levels must be non-negative")
        if self.fock_modes not in (1, 2):
            raise LayoutError("only 1 or 2 bosonic modes are supported")
        if self.fock_modes == 2 and (self.fock_levels < 2 or self.qubit_count > 0):
            raise LayoutError("two-mode layouts are bosonic-only")
        if self.dimension > MAX_DIMENSION:
            raise LayoutError(f"layout dimension {self.dimension} exceeds {MAX_DIMENSION}")

    @property
    def fock_dim(self) -> int:
        return max(self.fock_levels, 1)

    @property
    def dimension(self) -> int:
        return (2**self.qubit_count) * self.fock_dim**self.fock_modes

    @property
    def has_boson(self) -> bool:
        return self.fock_levels >= 2

    def bitstring(self, index: int) -> str:
        """Computational-basis label of the qubit part of a basis index."""
        q = index // self.fock_dim**self.fock_modes
        return format(q, f"0{self.qubit_count}b") if self.qubit_count else ""

    def qubit_bit(self, index: int, qubit: int) -> int:
        q = index // self.fock_dim**self.fock_modes
        return (q >> (self.qubit_count - 1 - qubit)) & 1


@dataclass
class StateVector:
    layout: HilbertLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.complex128)
        if amp.shape != (self.layout.dimension,):
            raise LayoutError(
                f"amplitude length {amp.shape} does not match layout dimension "
                f"{self.layout.dimension}"
            )
        self.amplitudes = amp

    @classmethod
    def ground(cls, layout: HilbertLayout) -> "StateVector":
        """|0...0> (all qubits down, vacuum)."""
        amp = np.zeros(layout.dimension, dtype=np.complex128)
        amp[0] = 1.0
        return cls(layout, amp)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def check_normalized(self, tol: float = NORM_TOL) -> None:
        if abs(self.norm - 1.0) > tol:
            raise NormDriftError(f"state norm {self.norm} deviates from 1 by more than {tol}")

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def fidelity(self, other: "StateVector") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def fock_leakage(self) -> float:
        """Population of the top two Fock levels (truncation-leakage metric)."""
        if not self.layout.has_boson or self.layout.fock_modes != 1:
            return 0.0
        f = self.layout.fock_dim
        probs = self.probabilities().reshape(-1, f)
        return float(probs[:, f - 2 :].sum())


@dataclass
class OperatorMatrix:
    layout: HilbertLayout
    entries: np.ndarray
    unitary: bool = False
    hermitian: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=np.complex128)
        d = self.layout.dimension
        if ent.shape != (d, d):
            raise LayoutError(f"operator shape {ent.shape} does not match dimension {d}")
        self.entries = ent
        if self.unitary:
            dev = unitarity_deviation(ent)
            tol = self.meta.get("unitary_tol", UNITARY_TOL)
            if dev > tol:
                raise LayoutError(f"operator flagged unitary but U^dag U deviates by {dev:.3e}")
            self.meta.setdefault("unitary_deviation", dev)
        if self.hermitian:
            dev = float(np.abs(ent - ent.conj().T).max())
            if dev > HERMITIAN_TOL:
                raise LayoutError(f"operator flagged Hermitian but A - A^dag = {dev:.3e}")

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(
            self.layout,
            self.entries.conj().T,
            unitary=self.unitary,
            hermitian=self.hermitian,
            meta=dict(self.meta),
        )

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if other.layout != self.layout:
            raise LayoutError("layout mismatch in operator product")
        return OperatorMatrix(
            self.layout,
            self.entries @ other.entries,
            unitary=self.unitary and other.unitary,
        )


def unitarity_deviation(matrix: np.ndarray) -> float:
    d = matrix.shape[0]
    return float(np.abs(matrix.conj().T @ matrix - np.eye(d)).max())


def apply(state: StateVector, op: OperatorMatrix, strict: bool = True) -> StateVector:
    """Apply a dense operator; never silently renormalizes."""
    if op.layout != state.layout:
        raise LayoutError("operator layout does not match state layout")
    out = StateVector(state.layout, op.entries @ state.amplitudes)
    if strict and op.unitary and abs(out.norm - state.norm) > NORM_DRIFT_TOL:
        raise NormDriftError(
            f"norm drifted by {abs(out.norm - state.norm):.3e} under a flagged-unitary op "
            "(truncation leakage or a non-unitary operator applied as unitary)"
        )
    return out


def expectation(state: StateVector, op: OperatorMatrix) -> float:
    """<psi|A|psi> for Hermitian A; asserts a negligible imaginary residue."""
    if op.layout != state.layout:
        raise LayoutError("operator layout does not match state layout")
    dev = float(np.abs(op.entries - op.entries.conj().T).max())
    if dev > HERMITIAN_TOL and not op.hermitian:
        raise LayoutError(f"expectation requires a Hermitian operator (deviation {dev:.3e})")
    val = np.vdot(state.amplitudes, op.entries @ state.amplitudes)
    if abs(val.imag) > NORM_TOL:
        raise RuntimeError(f"expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)
