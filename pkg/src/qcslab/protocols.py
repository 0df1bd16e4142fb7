"""Protocol assembly and evaluation for qubit-based (and hybrid) sensors.

A protocol is a flat sequence of gates over a fixed layout.  Sensing slots
reference input components through an explicit (slot, qubit) -> component
schedule, so static, alternating, and time-indexed input feeds share one
representation.  Evaluation is batched over inputs; the cache kept during
the forward pass supports exact adjoint differentiation in training.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import gates as G
from .hilbert import HilbertLayout, LayoutError

PAULI_INIT_MODES = ("haar", "uniform")


@dataclass(frozen=True)
class Gate:
    kind: str
    qubit: int | None = None
    pslice: tuple[int, int] | None = None
    fixed: tuple[float, ...] = ()
    sense_slot: int | None = None

    @property
    def n_params(self) -> int:
        return 0 if self.pslice is None else self.pslice[1] - self.pslice[0]


@dataclass(frozen=True)
class ProtocolSpec:
    """Immutable layered protocol description.

    layers is the ordered gate program including the measurement block;
    schedule[l, m] gives the input component sensed by qubit m in slot l
    (for hybrid displacement sensing the two columns are Re/Im components).
    """

    layout: HilbertLayout
    layers: tuple[Gate, ...]
    schedule: np.ndarray
    n_inputs: int
    param_names: tuple[str, ...]
    kind: str = "custom"
    meta: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def n_layers(self) -> int:
        return int(self.meta.get("L", max(1, self.schedule.shape[0])))

    def zero_params(self) -> np.ndarray:
        return np.zeros(self.n_params)


@dataclass
class OutcomeDistribution:
    labels: list[str]
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("outcome probabilities must be non-negative and sum to 1")
        self.probs = np.clip(p, 0.0, None)


class _SpecBuilder:
    def __init__(self, layout: HilbertLayout, kind: str):
        self.layout = layout
        self.kind = kind
        self.gates: list[Gate] = []
        self.names: list[str] = []

    def fixed(self, kind: str, qubit: int | None = None, *fixed: float, slot: int | None = None):
        self.gates.append(Gate(kind, qubit=qubit, fixed=tuple(fixed), sense_slot=slot))

    def param(self, kind: str, qubit: int | None, names: list[str]):
        start = len(self.names)
        self.names.extend(names)
        self.gates.append(Gate(kind, qubit=qubit, pslice=(start, start + len(names))))

    def shared(self, kind: str, qubit: int | None, pslice: tuple[int, int]):
        self.gates.append(Gate(kind, qubit=qubit, pslice=pslice))

    def build(self, schedule: np.ndarray, n_inputs: int, meta: dict) -> ProtocolSpec:
        return ProtocolSpec(
            layout=self.layout,
            layers=tuple(self.gates),
            schedule=np.asarray(schedule, dtype=int),
            n_inputs=n_inputs,
            param_names=tuple(self.names),
            kind=self.kind,
            meta=meta,
        )


# ---------------------------------------------------------------------------
# Protocol builders
# ---------------------------------------------------------------------------

RAMSEY_OFFSET = np.pi / 8  # fixed z offset giving x(theta) = 1 - sin^2(theta - 3 pi/8)


def _static_schedule(slots: int, qubits: int) -> np.ndarray:
    return np.tile(np.arange(qubits), (slots, 1))


def build_ramsey_qs(
    qubits: int, entangled: bool = False, trainable: bool = False
) -> ProtocolSpec:
    """Conventional QS protocol: Ramsey interferometers, optionally with
    trainable (and entangling) probe/measurement blocks (L = 1)."""
    if not 1 <= qubits <= 7:
        raise LayoutError("qubit count must be in 1..7")
    layout = HilbertLayout(qubit_count=qubits)
    b = _SpecBuilder(layout, "ramsey")
    b.fixed("h_all")
    if entangled:
        b.param("pauli", None, [f"probe/V/c{j}" for j in range(4**qubits)])
        for m in range(qubits):
            b.param("rx", m, [f"probe/R/q{m}/phi"])
            b.param("rz", m, [f"probe/R/q{m}/zeta"])
    elif trainable:
        for m in range(qubits):
            b.param("rx", m, [f"probe/R/q{m}/phi"])
            b.param("rz", m, [f"probe/R/q{m}/zeta"])
    else:
        for m in range(qubits):
            b.fixed("fixed_rz", m, RAMSEY_OFFSET)
    b.fixed("sense", slot=0)
    if entangled:
        b.param("pauli", None, [f"meas/V/c{j}" for j in range(4**qubits)])
    elif trainable:
        for m in range(qubits):
            b.param("rx", m, [f"meas/R/q{m}/phi"])
            b.param("rz", m, [f"meas/R/q{m}/zeta"])
    b.fixed("h_all")
    meta = {"L": 1, "entangled": entangled, "trainable": trainable}
    return b.build(_static_schedule(1, qubits), qubits, meta)


def ramsey_response(theta: np.ndarray) -> np.ndarray:
    """Closed-form excitation probability of the fixed single-qubit Ramsey."""
    theta = np.asarray(theta, dtype=float)
    return np.sin(theta + RAMSEY_OFFSET) ** 2


def build_qsp_qcs(layers: int) -> ProtocolSpec:
    """Single-qubit QSP ansatz: H, then L x [R_x(phi) R_z(zeta) sense(theta)],
    then a trainable measurement rotation and H.  Static input schedule."""
    if layers < 1:
        raise ValueError("layer count must be >= 1")
    layout = HilbertLayout(qubit_count=1)
    b = _SpecBuilder(layout, "qsp")
    b.fixed("h_all")
    for l in range(layers):
        b.param("rx", 0, [f"layer{l}/phi"])
        b.param("rz", 0, [f"layer{l}/zeta"])
        b.fixed("sense", slot=l)
    b.param("rx", 0, ["meas/phi"])
    b.param("rz", 0, ["meas/zeta"])
    b.fixed("h_all")
    return b.build(_static_schedule(layers, 1), 1, {"L": layers})


def build_qnn_qcs(
    qubits: int, layers: int, input_schedule: str | np.ndarray = "static"
) -> ProtocolSpec:
    """Multi-qubit QNN ansatz: per layer a trainable Pauli-string block V,
    per-qubit rotations, then the sensing slot; measurement block V plus
    Hadamards before computational-basis readout."""
    if not 1 <= qubits <= 7:
        raise LayoutError("qubit count must be in 1..7")
    if layers < 1:
        raise ValueError("layer count must be >= 1")
    layout = HilbertLayout(qubit_count=qubits)
    if isinstance(input_schedule, str):
        if input_schedule == "static":
            schedule = _static_schedule(layers, qubits)
            n_inputs = qubits
        elif input_schedule == "alternating":
            schedule = (np.arange(layers) % 2)[:, None] * np.ones((1, qubits), dtype=int)
            if qubits != 1:
                raise ValueError("alternating schedule is the single-qubit bivariate protocol")
            n_inputs = 2
        elif input_schedule == "time":
            # layer l senses component m * L + l of a flattened (M, L) signal
            schedule = np.arange(layers)[:, None] + layers * np.arange(qubits)[None, :]
            n_inputs = qubits * layers
        else:
            raise ValueError(f"unknown schedule {input_schedule!r}")
    else:
        schedule = np.asarray(input_schedule, dtype=int)
        if schedule.shape != (layers, qubits):
            raise ValueError("explicit schedule must have shape (L, M)")
        n_inputs = int(schedule.max()) + 1
    b = _SpecBuilder(layout, "qnn")
    b.fixed("h_all")
    for l in range(layers):
        b.param("pauli", None, [f"layer{l}/V/c{j}" for j in range(4**qubits)])
        for m in range(qubits):
            b.param("rx", m, [f"layer{l}/R/q{m}/phi"])
            b.param("rz", m, [f"layer{l}/R/q{m}/zeta"])
        b.fixed("sense", slot=l)
    b.param("pauli", None, [f"meas/V/c{j}" for j in range(4**qubits)])
    b.fixed("h_all")
    return b.build(schedule, n_inputs, {"L": layers, "schedule": str(input_schedule)})


# ---------------------------------------------------------------------------
# Parameter initialization
# ---------------------------------------------------------------------------


def haar_log_coefficients(qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Pauli-string coefficients of -i log(U) for a Haar-random U."""
    dim = 2**qubits
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    u = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    vals, vecs = np.linalg.eig(u)
    gen = (vecs * (-np.angle(vals))) @ np.linalg.inv(vecs)
    gen = (gen + gen.conj().T) / 2
    return G.pauli_overlaps(gen, qubits).real


def init_params(
    spec: ProtocolSpec, rng: np.random.Generator, pauli_init: str = "haar"
) -> np.ndarray:
    """Fresh parameter vector: angles uniform(-pi, pi); Pauli-string blocks
    from the log of a Haar-random unitary, or uniform if so configured."""
    if pauli_init not in PAULI_INIT_MODES:
        raise ValueError(f"pauli_init must be one of {PAULI_INIT_MODES}")
    params = rng.uniform(-np.pi, np.pi, size=spec.n_params)
    if pauli_init == "haar":
        for gate in spec.layers:
            if gate.kind == "pauli":
                lo, hi = gate.pslice
                params[lo:hi] = haar_log_coefficients(spec.layout.qubit_count, rng)
    return params


# ---------------------------------------------------------------------------
# Evaluation engine
# ---------------------------------------------------------------------------


def _zsign_table(layout: HilbertLayout) -> np.ndarray:
    """signs[m, i] = sigma_z eigenvalue sign entering exp(i theta * sign)."""
    dim = layout.dimension
    idx = np.arange(dim)
    fdim = layout.fock_dim**layout.fock_modes
    signs = np.empty((layout.qubit_count, dim))
    for m in range(layout.qubit_count):
        bit = (idx // fdim >> (layout.qubit_count - 1 - m)) & 1
        signs[m] = np.where(bit == 0, -1.0, 1.0)
    return signs


def _gate_matrix(gate: Gate, params: np.ndarray, layout: HilbertLayout):
    """Dense matrix + auxiliary data for one (non-sensing) gate."""
    p = params[gate.pslice[0] : gate.pslice[1]] if gate.pslice else ()
    if gate.kind == "h_all":
        u = np.eye(layout.dimension)
        for m in range(layout.qubit_count):
            u = G.embed_qubit_op(G.HADAMARD, m, layout) @ u
        return u, None
    if gate.kind == "fixed_rz":
        return G.embed_qubit_op(G.rz_matrix(gate.fixed[0]), gate.qubit, layout), None
    if gate.kind == "rz":
        return G.embed_qubit_op(G.rz_matrix(p[0]), gate.qubit, layout), None
    if gate.kind == "rx":
        return G.embed_qubit_op(G.rx_matrix(p[0]), gate.qubit, layout), None
    if gate.kind == "rot":
        return G.embed_qubit_op(G.rot_matrix(*p), gate.qubit, layout), None
    if gate.kind == "pauli":
        gen = G.pauli_string_generator(p, layout.qubit_count)
        vals, vecs = np.linalg.eigh(gen)
        u = (vecs * np.exp(-1j * vals)) @ vecs.conj().T
        return u, (vals, vecs)
    raise ValueError(f"unsupported gate kind {gate.kind!r}")


def _single_qubit_u2(gate: Gate, params: np.ndarray):
    p = params[gate.pslice[0] : gate.pslice[1]] if gate.pslice else ()
    if gate.kind == "fixed_rz":
        return G.rz_matrix(gate.fixed[0])
    if gate.kind == "rz":
        return G.rz_matrix(p[0])
    if gate.kind == "rx":
        return G.rx_matrix(p[0])
    if gate.kind == "rot":
        return G.rot_matrix(*p)
    return None


def _apply_on_qubit(psi: np.ndarray, u2: np.ndarray, target: int, layout: HilbertLayout):
    """Apply a 2x2 operator on one qubit axis of a (batch, dim) state block
    as a single GEMM (qubit axis moved last)."""
    batch = psi.shape[0]
    left = 2**target
    right = layout.dimension // (2 * left)
    if right == 1:
        out = psi.reshape(batch * left, 2) @ u2.T
    else:
        view = psi.reshape(batch * left, 2, right).transpose(0, 2, 1).reshape(-1, 2)
        out = (view @ u2.T).reshape(batch * left, right, 2).transpose(0, 2, 1)
    return out.reshape(batch, layout.dimension)


_HALL_CACHE: dict = {}


def _h_all_matrix(layout: HilbertLayout) -> np.ndarray:
    key = (layout.qubit_count, layout.fock_levels, layout.fock_modes)
    if key not in _HALL_CACHE:
        u = np.eye(layout.dimension)
        for m in range(layout.qubit_count):
            u = G.embed_qubit_op(G.HADAMARD, m, layout) @ u
        _HALL_CACHE[key] = u
    return _HALL_CACHE[key]


def forward_batch(spec: ProtocolSpec, params: np.ndarray, inputs: np.ndarray,
                  keep_cache: bool = False):
    """Final amplitudes for a batch of inputs; optionally keeps the per-gate
    state cache used by adjoint differentiation.

    inputs has shape (batch, n_inputs).  Single-qubit gates are applied on
    the target axis directly; only Pauli blocks and the Hadamard wall use
    dense layout-sized matrices.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != spec.n_inputs:
        raise ValueError(f"expected {spec.n_inputs} input components, got {inputs.shape[1]}")
    batch = inputs.shape[0]
    dim = spec.layout.dimension
    signs = _zsign_table(spec.layout)
    psi = np.zeros((batch, dim), dtype=np.complex128)
    psi[:, 0] = 1.0
    cache = {"states": [psi], "mats": []} if keep_cache else None
    for gate in spec.layers:
        if gate.kind == "sense":
            theta = inputs[:, spec.schedule[gate.sense_slot]]  # (batch, M)
            diag = np.exp(1j * (theta @ signs))
            psi = psi * diag
            entry = ("diag", diag, None)
        elif gate.kind == "h_all":
            u = _h_all_matrix(spec.layout)
            psi = psi @ u.T
            entry = ("mat", u, None)
        elif gate.kind == "pauli":
            u, aux = _gate_matrix(gate, params, spec.layout)
            psi = psi @ u.T
            entry = ("mat", u, aux)
        else:
            u2 = _single_qubit_u2(gate, params)
            psi = _apply_on_qubit(psi, u2, gate.qubit, spec.layout)
            entry = ("q", u2, None)
        if keep_cache:
            cache["mats"].append(entry)
            cache["states"].append(psi)
    return (psi, cache) if keep_cache else psi


def forward_probs(spec: ProtocolSpec, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """(batch, 2^M) bitstring probabilities."""
    psi = forward_batch(spec, params, inputs)
    return np.abs(psi) ** 2


def eval_distribution(
    spec: ProtocolSpec, u: np.ndarray, params: np.ndarray | None = None
) -> OutcomeDistribution:
    """Outcome probabilities of one protocol run from |0...0>."""
    params = spec.zero_params() if params is None else np.asarray(params, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    probs = forward_probs(spec, params, u[None, :])[0]
    labels = [spec.layout.bitstring(i) for i in range(spec.layout.dimension)]
    total = probs.sum()
    if abs(total - 1.0) > 1e-8:
        raise RuntimeError(f"norm drift in evaluation: probabilities sum to {total}")
    return OutcomeDistribution(labels, probs / total)


def qubit_marginals(probs: np.ndarray, layout: HilbertLayout) -> np.ndarray:
    """Per-qubit excitation probabilities from joint bitstring probabilities."""
    bits = bit_table(layout)
    return probs @ bits


def bit_table(layout: HilbertLayout) -> np.ndarray:
    """(dim, M) matrix of qubit bits per basis state."""
    dim = layout.dimension
    out = np.empty((dim, layout.qubit_count))
    for i in range(dim):
        for m in range(layout.qubit_count):
            out[i, m] = layout.qubit_bit(i, m)
    return out


# ---------------------------------------------------------------------------
# Adjoint differentiation
# ---------------------------------------------------------------------------


def _frechet_kernel(vals: np.ndarray) -> np.ndarray:
    """Daleckii-Krein divided differences of exp(-i lambda).

    Off-diagonal (f(l_i) - f(l_j)) / (l_i - l_j); near-degenerate pairs use
    the midpoint derivative -i exp(-i (l_i + l_j)/2) for smoothness.
    """
    f = np.exp(-1j * vals)
    dv = vals[:, None] - vals[None, :]
    near = np.abs(dv) < 1e-9
    k = (f[:, None] - f[None, :]) / np.where(near, 1.0, dv)
    mid = -1j * np.exp(-1j * (vals[:, None] + vals[None, :]) / 2)
    return np.where(near, mid, k)


def _single_qubit_derivatives(gate: Gate, params: np.ndarray) -> list[np.ndarray]:
    """2x2 derivative matrices dU2/dp for each parameter of a one-qubit gate."""
    p = params[gate.pslice[0] : gate.pslice[1]]
    if gate.kind == "rz":
        return [-1j * G.SIGMA_Z @ G.rz_matrix(p[0])]
    if gate.kind == "rx":
        return [-0.5j * G.SIGMA_X @ G.rx_matrix(p[0])]
    if gate.kind == "rot":
        omega, th, ph = p
        n = G.rotation_axis(th, ph)
        nsig = n[0] * G.SIGMA_X + n[1] * G.SIGMA_Y + n[2] * G.SIGMA_Z
        u2 = G.rot_matrix(omega, th, ph)
        dn_dth = np.array([np.cos(th) * np.sin(ph), np.cos(th) * np.cos(ph), -np.sin(th)])
        dn_dph = np.array([np.sin(th) * np.cos(ph), -np.sin(th) * np.sin(ph), 0.0])
        s = np.sin(omega / 2)
        return [
            -0.5j * nsig @ u2,
            -1j * s * (dn_dth[0] * G.SIGMA_X + dn_dth[1] * G.SIGMA_Y + dn_dth[2] * G.SIGMA_Z),
            -1j * s * (dn_dph[0] * G.SIGMA_X + dn_dph[1] * G.SIGMA_Y + dn_dph[2] * G.SIGMA_Z),
        ]
    raise ValueError(f"no derivative for gate kind {gate.kind!r}")


def adjoint_gradient(
    spec: ProtocolSpec,
    params: np.ndarray,
    inputs: np.ndarray,
    dloss_dprob: np.ndarray,
) -> np.ndarray:
    """Exact gradient of a real loss through the deterministic pipeline.

    dloss_dprob is (batch, dim): dL/d|psi_k|^2 at the output amplitudes.
    """
    psi_out, cache = forward_batch(spec, params, inputs, keep_cache=True)
    lam = dloss_dprob * psi_out  # dL/dpsi*
    grads = np.zeros(spec.n_params)
    layout = spec.layout
    for gate, entry, psi_in in zip(
        reversed(spec.layers), reversed(cache["mats"]), reversed(cache["states"][:-1])
    ):
        kind, u, aux = entry
        if gate.pslice is not None:
            lo, hi = gate.pslice
            if gate.kind == "pauli":
                # dL/dp = 2 Re tr(dU @ C), C[j, i] = sum_b psi_in[b, j] lam*[b, i]
                c_mat = psi_in.T @ lam.conj()
                vals, vecs = aux
                phi = _frechet_kernel(vals)
                d_mat = vecs.conj().T @ c_mat @ vecs
                y = vecs.conj() @ (phi * d_mat.T) @ vecs.T
                qn = layout.qubit_count
                idx = np.arange(2**qn)
                for n in range(hi - lo):
                    perm, phase = G.pauli_action(n, qn)
                    grads[lo + n] += 2 * (phase * y[perm, idx]).sum().real
            else:
                # reduce C to the gate's qubit factor: C2[q', q] sums the
                # spectator indices, then dL/dp = 2 Re sum(dU2 * C2.T)
                batch = psi_in.shape[0]
                left = 2**gate.qubit
                right = layout.dimension // (2 * left)
                a = psi_in.reshape(batch * left, 2, right)
                b = lam.conj().reshape(batch * left, 2, right)
                c2 = np.einsum("xqr,xsr->qs", a, b)
                for j, du2 in enumerate(_single_qubit_derivatives(gate, params)):
                    grads[lo + j] += 2 * (du2 * c2.T).sum().real
        if kind == "diag":
            lam = lam * u.conj()
        elif kind == "q":
            lam = _apply_on_qubit(lam, u.conj().T, gate.qubit, layout)
        else:
            lam = lam @ u.conj()
    return grads


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def spec_to_document(spec: ProtocolSpec, params: np.ndarray | None = None) -> dict:
    return {
        "kind": spec.kind,
        "layout": {
            "qubit_count": spec.layout.qubit_count,
            "fock_levels": spec.layout.fock_levels,
            "fock_modes": spec.layout.fock_modes,
        },
        "layers": [
            {
                "kind": g.kind,
                "qubit": g.qubit,
                "pslice": list(g.pslice) if g.pslice else None,
                "fixed": list(g.fixed),
                "sense_slot": g.sense_slot,
            }
            for g in spec.layers
        ],
        "schedule": spec.schedule.tolist(),
        "n_inputs": spec.n_inputs,
        "param_names": list(spec.param_names),
        "params": None if params is None else np.asarray(params).tolist(),
        "meta": dict(spec.meta),
    }


def spec_from_document(doc: dict) -> tuple[ProtocolSpec, np.ndarray | None]:
    layout = HilbertLayout(**doc["layout"])
    layers = tuple(
        Gate(
            kind=g["kind"],
            qubit=g["qubit"],
            pslice=tuple(g["pslice"]) if g["pslice"] else None,
            fixed=tuple(g["fixed"]),
            sense_slot=g["sense_slot"],
        )
        for g in doc["layers"]
    )
    spec = ProtocolSpec(
        layout=layout,
        layers=layers,
        schedule=np.asarray(doc["schedule"], dtype=int),
        n_inputs=doc["n_inputs"],
        param_names=tuple(doc["param_names"]),
        kind=doc["kind"],
        meta=dict(doc["meta"]),
    )
    params = None if doc.get("params") is None else np.asarray(doc["params"], dtype=float)
    return spec, params
