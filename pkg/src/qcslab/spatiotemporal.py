"""Spatiotemporal sensing architectures over time-varying multichannel signals.

Four schemes share one budget of N = T sensing periods per qubit:

* R  - conventional: per time step, trainable single-qubit rotations around
       the sensing slot, measure all qubits, reset (M x T bits total);
* T  - temporally coherent: one pass, single-qubit rotations only, one
       M-bit measurement;
* S  - spatially coherent: like R but with trainable multi-qubit blocks;
* ST - fully coherent: one pass with multi-qubit blocks, one measurement.

R and S reset to |0...0> exactly between steps, so their steps are
independent single-sensing circuits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import protocols as pr
from .hilbert import HilbertLayout


@dataclass(frozen=True)
class ArchitectureKind:
    name: str
    uses_multiqubit_v: bool
    measures_per_step: bool


ARCHITECTURES = {
    "R": ArchitectureKind("R", uses_multiqubit_v=False, measures_per_step=True),
    "T": ArchitectureKind("T", uses_multiqubit_v=False, measures_per_step=False),
    "S": ArchitectureKind("S", uses_multiqubit_v=True, measures_per_step=True),
    "ST": ArchitectureKind("ST", uses_multiqubit_v=True, measures_per_step=False),
}


def measurement_count(kind: str, channels: int, steps: int) -> int:
    return channels * steps if ARCHITECTURES[kind].measures_per_step else channels


@dataclass
class SpatiotemporalSignal:
    theta: np.ndarray  # (channels, steps) integrated bin phases
    rms_phase: float
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2 or not np.all(np.isfinite(theta)):
            raise ValueError("theta must be a finite (channels, steps) matrix")
        self.theta = theta
        recomputed = float(np.sqrt(np.mean(theta**2)))
        if abs(recomputed - self.rms_phase) > 1e-12 * max(1.0, recomputed):
            raise ValueError("rms_phase does not match recomputation")

    @property
    def channels(self) -> int:
        return self.theta.shape[0]

    @property
    def steps(self) -> int:
        return self.theta.shape[1]


def signal_from_theta(theta: np.ndarray, source: dict | None = None) -> SpatiotemporalSignal:
    theta = np.asarray(theta, dtype=float)
    return SpatiotemporalSignal(theta, float(np.sqrt(np.mean(theta**2))), source or {})


# ---------------------------------------------------------------------------
# Architecture construction
# ---------------------------------------------------------------------------


def _step_spec(qubits: int, entangling: bool) -> pr.ProtocolSpec:
    """One measure-and-reset step: trainable block, sense, trainable block."""
    layout = HilbertLayout(qubit_count=qubits)
    b = pr._SpecBuilder(layout, "step")
    if entangling:
        b.param("pauli", None, [f"pre/V/c{j}" for j in range(4**qubits)])
    else:
        for m in range(qubits):
            b.param("rot", m, [f"pre/R/q{m}/{a}" for a in ("omega", "theta", "phi")])
    b.fixed("sense", slot=0)
    if entangling:
        b.param("pauli", None, [f"post/V/c{j}" for j in range(4**qubits)])
    else:
        for m in range(qubits):
            b.param("rot", m, [f"post/R/q{m}/{a}" for a in ("omega", "theta", "phi")])
    return b.build(np.arange(qubits)[None, :], qubits, {"L": 1})


def _coherent_spec(qubits: int, steps: int, entangling: bool) -> pr.ProtocolSpec:
    """Single-pass protocol: T trainable blocks interleaved with the T
    time-indexed sensing slots plus a final measurement block."""
    layout = HilbertLayout(qubit_count=qubits)
    b = pr._SpecBuilder(layout, "ST" if entangling else "T")
    for l in range(steps):
        if entangling:
            b.param("pauli", None, [f"layer{l}/V/c{j}" for j in range(4**qubits)])
        else:
            for m in range(qubits):
                b.param("rot", m, [f"layer{l}/R/q{m}/{a}" for a in ("omega", "theta", "phi")])
        b.fixed("sense", slot=l)
    if entangling:
        b.param("pauli", None, [f"meas/V/c{j}" for j in range(4**qubits)])
    else:
        for m in range(qubits):
            b.param("rot", m, [f"meas/R/q{m}/{a}" for a in ("omega", "theta", "phi")])
    schedule = np.arange(steps)[:, None] + steps * np.arange(qubits)[None, :]
    return b.build(schedule, qubits * steps, {"L": steps})


class SpatioModel:
    """Training adapter for one spatiotemporal architecture.

    Inputs are flattened (channels, steps) phase matrices; the output record
    is per-qubit excitation bits: (M * T,) for per-step-measuring kinds and
    (M,) for the coherent kinds.
    """

    def __init__(self, kind: str, channels: int, steps: int):
        if kind not in ARCHITECTURES:
            raise ValueError(f"kind must be one of {sorted(ARCHITECTURES)}")
        self.kind = ARCHITECTURES[kind]
        self.channels = channels
        self.steps = steps
        if self.kind.measures_per_step:
            self.step_spec = _step_spec(channels, self.kind.uses_multiqubit_v)
            self._pstep = self.step_spec.n_params
            self.n_params = self._pstep * steps
        else:
            self.spec = _coherent_spec(channels, steps, self.kind.uses_multiqubit_v)
            self.n_params = self.spec.n_params
        self._bits = pr.bit_table(HilbertLayout(qubit_count=channels))
        self._rules = None

    @property
    def n_out(self) -> int:
        return measurement_count(self.kind.name, self.channels, self.steps)

    def init_params(self, rng: np.random.Generator, pauli_init: str = "haar") -> np.ndarray:
        if self.kind.measures_per_step:
            return np.concatenate(
                [pr.init_params(self.step_spec, rng, pauli_init) for _ in range(self.steps)]
            )
        return pr.init_params(self.spec, rng, pauli_init)

    def _step_inputs(self, inputs: np.ndarray, l: int) -> np.ndarray:
        cols = l + self.steps * np.arange(self.channels)
        return inputs[:, cols]

    def joint_probs(self, params, inputs) -> np.ndarray:
        """(batch, steps(or 1), 2^M) joint bitstring probabilities."""
        inputs = np.atleast_2d(inputs)
        if self.kind.measures_per_step:
            out = [
                pr.forward_probs(
                    self.step_spec, params[l * self._pstep : (l + 1) * self._pstep],
                    self._step_inputs(inputs, l),
                )
                for l in range(self.steps)
            ]
            return np.stack(out, axis=1)
        return pr.forward_probs(self.spec, params, inputs)[:, None, :]

    def probs(self, params, inputs) -> np.ndarray:
        """(batch, n_out) per-qubit excitation probabilities."""
        joint = self.joint_probs(params, inputs)
        marg = joint @ self._bits  # (batch, steps|1, M)
        return marg.reshape(marg.shape[0], -1)

    def sample_xbar(self, joint: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
        """One projective M-qubit measurement per step per shot, emitted as bits."""
        batch, nsteps, dim = joint.shape
        flat = joint.reshape(batch * nsteps, dim)
        cdf = np.cumsum(flat, axis=1)
        cdf[:, -1] = np.maximum(cdf[:, -1], 1.0)
        u = rng.random((batch * nsteps, shots))
        draws = (u[:, :, None] > cdf[:, None, :]).sum(axis=2)
        bits = self._bits[draws].mean(axis=1)  # (batch*nsteps, M)
        return bits.reshape(batch, -1)

    def amp_grad_blocks(self, dxbar: np.ndarray) -> np.ndarray:
        """(batch, steps|1, dim) amplitude-probability gradients."""
        batch = dxbar.shape[0]
        per = dxbar.reshape(batch, -1, self.channels)
        return per @ self._bits.T

    def adjoint(self, params, inputs, dxbar) -> np.ndarray:
        inputs = np.atleast_2d(inputs)
        blocks = self.amp_grad_blocks(np.asarray(dxbar, dtype=float))
        if not self.kind.measures_per_step:
            return pr.adjoint_gradient(self.spec, params, inputs, blocks[:, 0, :])
        grads = np.zeros(self.n_params)
        for l in range(self.steps):
            grads[l * self._pstep : (l + 1) * self._pstep] = pr.adjoint_gradient(
                self.step_spec,
                params[l * self._pstep : (l + 1) * self._pstep],
                self._step_inputs(inputs, l),
                blocks[:, l, :],
            )
        return grads

    def shift_rules(self):
        from .training import parameter_shift_table

        if self._rules is None:
            if self.kind.measures_per_step:
                self._rules = parameter_shift_table(self.step_spec) * self.steps
            else:
                self._rules = parameter_shift_table(self.spec)
        return self._rules


def run_architecture(
    kind: str,
    model: SpatioModel,
    params: np.ndarray,
    signal: SpatiotemporalSignal | np.ndarray,
    shots: int,
    rng: np.random.Generator,
):
    """Sample one signal through an architecture; returns the bit record.

    The sensing-period budget is N = steps for every kind; the record
    carries the per-kind measurement count for budget audits.
    """
    from .sampling import ShotRecord

    theta = signal.theta if isinstance(signal, SpatiotemporalSignal) else np.asarray(signal)
    if theta.shape != (model.channels, model.steps):
        raise ValueError(
            f"signal shape {theta.shape} does not match architecture "
            f"({model.channels}, {model.steps})"
        )
    if ARCHITECTURES[kind] != model.kind:
        raise ValueError("architecture kind mismatch")
    u = theta.reshape(1, -1)
    joint = model.joint_probs(params, u)
    raw = np.stack(
        [model.sample_xbar(joint, 1, rng)[0] for _ in range(shots)]
    )
    rec = ShotRecord(shots=shots, raw=raw, xbar=raw.mean(axis=0), seed=())
    rec.meta = {
        "kind": kind,
        "measurements_per_shot": model.n_out,
        "sensing_periods": model.steps,
    }
    return rec


# ---------------------------------------------------------------------------
# Preprocessing: PCA channel ranking + boxcar time binning + RMS scaling
# ---------------------------------------------------------------------------


def pca_channel_order(train_matrix: np.ndarray) -> np.ndarray:
    """Channels ranked by |loading| on the first principal component.

    train_matrix is (samples, channels); degenerate directions tie-break by
    channel index (stable sort on negated magnitude).
    """
    x = np.asarray(train_matrix, dtype=float)
    x = x - x.mean(axis=0, keepdims=True)
    cov = x.T @ x
    vals, vecs = np.linalg.eigh(cov)
    if vals[-1] <= 1e-30 * max(1.0, abs(np.trace(cov))):
        return np.arange(cov.shape[0])  # fully degenerate: index order
    loading = np.round(np.abs(vecs[:, -1]), 12)
    return np.argsort(-loading, kind="stable")


def boxcar_bins(series: np.ndarray, bins: int) -> np.ndarray:
    """Average contiguous groups of samples into `bins` values (tail samples
    beyond an even split are folded into the last bin)."""
    n = series.shape[-1]
    if bins > n:
        raise ValueError("more bins than samples")
    if bins == n:
        return series.copy()
    edges = np.linspace(0, n, bins + 1).astype(int)
    return np.stack(
        [series[..., lo:hi].mean(axis=-1) for lo, hi in zip(edges[:-1], edges[1:])], axis=-1
    )


def preprocess_channels(
    raw: np.ndarray,
    keep: int,
    bins: int,
    theta_rms: float | None = None,
    train_matrix: np.ndarray | None = None,
) -> SpatiotemporalSignal:
    """Rank channels on the first principal component, keep the top ones,
    boxcar-average time into bins, and optionally scale to a target RMS."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2:
        raise ValueError("raw must be (channels, samples)")
    if keep > raw.shape[0]:
        raise ValueError("cannot keep more channels than provided")
    ranking_data = raw.T if train_matrix is None else train_matrix
    order = pca_channel_order(ranking_data)
    selected = order[:keep]
    theta = boxcar_bins(raw[selected], bins)
    scale = 1.0
    if theta_rms is not None:
        current = float(np.sqrt(np.mean(theta**2)))
        if current == 0:
            raise ValueError("cannot scale an all-zero signal to target RMS")
        scale = theta_rms / current
        theta = theta * scale
    return SpatiotemporalSignal(
        theta,
        float(np.sqrt(np.mean(theta**2))),
        {"selected_channels": selected.tolist(), "scale": scale},
    )


def preprocess_trials(
    trials: np.ndarray, keep: int, bins: int, theta_rms: float | None = None
) -> tuple[np.ndarray, dict]:
    """Dataset-level preprocessing: one channel ranking from all trials
    stacked in time, one dataset-wide RMS scale."""
    trials = np.asarray(trials, dtype=float)  # (n, channels, samples)
    stacked = np.concatenate(list(trials), axis=1).T  # (n*samples, channels)
    order = pca_channel_order(stacked)
    selected = order[:keep]
    theta = np.stack([boxcar_bins(t[selected], bins) for t in trials])
    scale = 1.0
    if theta_rms is not None:
        current = float(np.sqrt(np.mean(theta**2)))
        scale = theta_rms / current
        theta = theta * scale
    return theta, {"selected_channels": selected.tolist(), "scale": scale}


# ---------------------------------------------------------------------------
# CSV signal format
# ---------------------------------------------------------------------------


def write_signal_csv(path: str | Path, matrix: np.ndarray, channel_ids=None) -> None:
    matrix = np.asarray(matrix, dtype=float)
    channel_ids = channel_ids or [f"ch{c}" for c in range(matrix.shape[0])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel_id"] + [f"t{j}" for j in range(matrix.shape[1])])
        for cid, row in zip(channel_ids, matrix):
            writer.writerow([cid] + [repr(float(v)) for v in row])


def read_signal_csv(path: str | Path) -> tuple[np.ndarray, list[str]]:
    ids, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return np.asarray(rows), ids


def write_label_sidecar(path: str | Path, trial_ids, labels) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial_id", "label"])
        for tid, lab in zip(trial_ids, labels):
            writer.writerow([tid, int(lab)])


def read_label_sidecar(path: str | Path) -> dict[str, int]:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for tid, lab in reader:
            out[tid] = int(lab)
    return out


def load_csv_trials(signal_dir: str | Path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Load all trial CSVs named in labels.csv from a directory."""
    signal_dir = Path(signal_dir)
    labels_map = read_label_sidecar(signal_dir / "labels.csv")
    trial_ids = sorted(labels_map)
    mats = [read_signal_csv(signal_dir / f"{tid}.csv")[0] for tid in trial_ids]
    return np.stack(mats), np.array([labels_map[t] for t in trial_ids]), trial_ids
