"""Hybrid qubit-cavity protocol: conditional-displacement ladder probe,
displacement sensing, mirrored measurement unitary, qubit readout.

The probe is R(0), then D alternating [CD(x_d, y_d), R(d)] layers; the
measurement unitary is the exact adjoint of the probe, so the whole circuit
is the identity at zero sensed displacement.  Parameters: 3 angles per
rotation (d = 0..D) plus 2 conditional-displacement amplitudes per layer
(d = 1..D), 5D + 3 in total; every parameter appears in two mirrored gates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gates as G
from .hilbert import HilbertLayout
from .protocols import _frechet_kernel

DEFAULT_FOCK = 70
LEAKAGE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class HGate:
    kind: str  # 'rot_q' | 'cd' | 'sense'
    pslice: tuple[int, int] | None = None
    dagger: bool = False


@dataclass(frozen=True)
class HybridSpec:
    depth: int
    fock_levels: int = DEFAULT_FOCK
    chi_d: float = 1.0
    cd_init: float = 0.5  # conditional-displacement init half-width

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")

    @property
    def layout(self) -> HilbertLayout:
        return HilbertLayout(qubit_count=1, fock_levels=self.fock_levels)

    @property
    def n_params(self) -> int:
        return 5 * self.depth + 3

    @property
    def param_names(self) -> tuple[str, ...]:
        names = ["R0/omega", "R0/theta", "R0/phi"]
        for d in range(1, self.depth + 1):
            names += [f"CD{d}/x", f"CD{d}/y", f"R{d}/omega", f"R{d}/theta", f"R{d}/phi"]
        return tuple(names)

    def gate_sequence(self) -> tuple[HGate, ...]:
        seq = [HGate("rot_q", (0, 3))]
        pos = 3
        for _ in range(self.depth):
            seq.append(HGate("cd", (pos, pos + 2)))
            seq.append(HGate("rot_q", (pos + 2, pos + 5)))
            pos += 5
        seq.append(HGate("sense"))
        for g in reversed(seq[:-1]):
            seq.append(HGate(g.kind, g.pslice, dagger=True))
        return tuple(seq)


def build_hybrid_qcs(
    depth: int, fock_levels: int = DEFAULT_FOCK, cd_init: float = 0.5
) -> HybridSpec:
    return HybridSpec(depth=depth, fock_levels=fock_levels, cd_init=cd_init)


@dataclass
class TruncationReport:
    leakage: float
    mean_photon: float
    cutoff_used: int
    prob_drift: float | None = None

    @property
    def clean(self) -> bool:
        ok = self.leakage <= LEAKAGE_THRESHOLD
        if self.prob_drift is not None:
            ok = ok and self.prob_drift < 1e-6
        return ok


class HybridModel:
    """Dense batched evaluation of the hybrid protocol.

    States are stored as (batch, 2, F); `probs` returns the full per-amplitude
    probability vector (batch, 2 F) so both the qubit readout and the
    Fock-leakage penalty are linear functionals of the same output.
    """

    def __init__(self, spec: HybridSpec):
        self.spec = spec
        f = spec.fock_levels
        self.fock = f
        a = G.annihilator(f)
        self.q = G.quadrature_q(f)
        self.p = G.quadrature_p(f)
        self.number = (a.conj().T @ a).real
        # displacement via eigendecomposition of (a^dag - a): D(r e^{i phi}) =
        # e^{i phi n} V diag(e^{i r mu}) V^dag e^{-i phi n}
        k = 1j * (a.conj().T - a)  # Hermitian
        mu, v = np.linalg.eigh(k)
        self._disp_mu = mu
        self._disp_v = v
        self._nvec = np.arange(f)
        self._rules = None

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    @property
    def n_out(self) -> int:
        return 2 * self.fock

    def init_params(self, rng: np.random.Generator, pauli_init: str = "haar") -> np.ndarray:
        params = rng.uniform(-np.pi, np.pi, size=self.n_params)
        for i, name in enumerate(self.spec.param_names):
            if "CD" in name:
                params[i] = rng.uniform(-self.spec.cd_init, self.spec.cd_init)
        return params

    # -- gate matrices -----------------------------------------------------

    def _cd_blocks(self, x: float, y: float):
        h = self.spec.chi_d * (x * self.q + y * self.p)
        vals, vecs = np.linalg.eigh(h)
        up = (vecs * np.exp(-1j * vals)) @ vecs.conj().T
        down = (vecs * np.exp(1j * vals)) @ vecs.conj().T
        return up, down, (vals, vecs)

    def _apply_rot(self, psi, u2):
        return np.matmul(u2, psi)

    def _apply_cd(self, psi, up, down):
        out = np.empty_like(psi)
        out[:, 0, :] = psi[:, 0, :] @ up.T
        out[:, 1, :] = psi[:, 1, :] @ down.T
        return out

    def _apply_disp(self, psi, alphas, sign=1.0):
        """Row-wise displacement D(sign * alpha) on the cavity."""
        batch, f = psi.shape[0], psi.shape[2]
        r = np.abs(alphas)
        phi = np.angle(alphas)
        rot = np.exp(1j * phi[:, None] * self._nvec)  # (b, F)
        # a^dag - a = -i K with K = i(a^dag - a) Hermitian, so
        # D(r) = exp(r (a^dag - a)) = V exp(-i r mu) V^dag
        ph = np.exp(-1j * sign * r[:, None] * self._disp_mu)
        v = self._disp_v
        out = (psi * rot.conj()[:, None, :]).reshape(2 * batch, f)
        out = (out @ v.conj()).reshape(batch, 2, f)
        out = (out * ph[:, None, :]).reshape(2 * batch, f)
        out = (out @ v.T).reshape(batch, 2, f)
        return out * rot[:, None, :]

    # -- forward / adjoint ---------------------------------------------------

    def forward(self, params: np.ndarray, inputs: np.ndarray, keep_cache: bool = False):
        inputs = np.atleast_2d(inputs)
        alphas = inputs[:, 0] + 1j * inputs[:, 1]
        batch = len(alphas)
        psi = np.zeros((batch, 2, self.fock), dtype=np.complex128)
        psi[:, 0, 0] = 1.0
        cache = {"states": [psi], "gates": []} if keep_cache else None
        for gate in self.spec.gate_sequence():
            if gate.kind == "sense":
                psi = self._apply_disp(psi, alphas, sign=-1.0 if gate.dagger else 1.0)
                entry = ("sense", None, None)
            elif gate.kind == "rot_q":
                u2 = G.rot_matrix(*params[gate.pslice[0] : gate.pslice[1]])
                if gate.dagger:
                    u2 = u2.conj().T
                psi = self._apply_rot(psi, u2)
                entry = ("rot_q", u2, None)
            else:
                x, y = params[gate.pslice[0] : gate.pslice[1]]
                up, down, aux = self._cd_blocks(x, y)
                if gate.dagger:
                    up, down = up.conj().T, down.conj().T
                psi = self._apply_cd(psi, up, down)
                entry = ("cd", (up, down), aux)
            if keep_cache:
                cache["gates"].append(entry)
                cache["states"].append(psi)
        return (psi, cache) if keep_cache else psi

    def probs(self, params, inputs) -> np.ndarray:
        psi = self.forward(params, inputs)
        return np.abs(psi.reshape(len(psi), -1)) ** 2

    def joint_probs(self, params, inputs) -> np.ndarray:
        return self.probs(params, inputs)

    def excitation(self, probs_full: np.ndarray) -> np.ndarray:
        return probs_full[:, self.fock :].sum(axis=1)

    def leakage(self, probs_full: np.ndarray) -> np.ndarray:
        per_block = probs_full.reshape(len(probs_full), 2, self.fock)
        return per_block[:, :, self.fock - 2 :].sum(axis=(1, 2))

    def excitation_grad_vec(self, batch: int) -> np.ndarray:
        v = np.zeros((batch, 2 * self.fock))
        v[:, self.fock :] = 1.0
        return v

    def leakage_grad_vec(self, batch: int) -> np.ndarray:
        v = np.zeros((batch, 2, self.fock))
        v[:, :, self.fock - 2 :] = 1.0
        return v.reshape(batch, -1)

    def sample_excitation(self, probs_full, shots: int, rng: np.random.Generator):
        p1 = np.clip(self.excitation(probs_full), 0.0, 1.0)
        return rng.binomial(shots, p1) / shots

    def adjoint(self, params, inputs, dloss_dprob) -> np.ndarray:
        psi_out, cache = self.forward(params, inputs, keep_cache=True)
        batch = len(psi_out)
        lam = dloss_dprob.reshape(batch, 2, self.fock) * psi_out
        grads = np.zeros(self.n_params)
        seq = self.spec.gate_sequence()
        for gate, entry, psi_in in zip(
            reversed(seq), reversed(cache["gates"]), reversed(cache["states"][:-1])
        ):
            kind, u, aux = entry
            if gate.kind == "rot_q":
                x = psi_in.transpose(0, 2, 1).reshape(-1, 2)
                z = lam.transpose(0, 2, 1).reshape(-1, 2)
                c2 = x.T @ z.conj()
                lo, _ = gate.pslice
                for j, du in enumerate(_rot_derivs(params[lo : lo + 3])):
                    if gate.dagger:
                        du = du.conj().T
                    grads[lo + j] += 2 * (du * c2.T).sum().real
                lam = np.matmul(u.conj().T, lam)
            elif gate.kind == "cd":
                up, down = u
                vals, vecs = aux
                lo, _ = gate.pslice
                qt = vecs.conj().T @ (self.spec.chi_d * self.q) @ vecs
                pt = vecs.conj().T @ (self.spec.chi_d * self.p) @ vecs
                phi_m = _frechet_kernel(vals)  # for exp(-i H)
                phi_p = phi_m.conj()  # for exp(+i H), real spectrum
                c_up = psi_in[:, 0, :].T @ lam[:, 0, :].conj()
                c_dn = psi_in[:, 1, :].T @ lam[:, 1, :].conj()
                d_up = vecs.conj().T @ c_up @ vecs
                d_dn = vecs.conj().T @ c_dn @ vecs
                ph_up, ph_dn = (phi_p, phi_m) if gate.dagger else (phi_m, phi_p)
                for j, direction in enumerate((qt, pt)):
                    val = (ph_up * direction * d_up.T).sum() + (
                        ph_dn * direction * d_dn.T
                    ).sum()
                    grads[lo + j] += 2 * val.real
                lam = self._apply_cd(lam, up.conj().T, down.conj().T)
            else:  # sense
                alphas = np.atleast_2d(inputs)[:, 0] + 1j * np.atleast_2d(inputs)[:, 1]
                lam = self._apply_disp(lam, alphas, sign=1.0 if gate.dagger else -1.0)
        return grads

    def shift_rules(self):
        # every parameter appears in a gate and its mirrored adjoint, so the
        # single-gate shift rule never applies; always central difference
        if self._rules is None:
            self._rules = [("cd", None)] * self.n_params
        return self._rules

    # -- diagnostics ---------------------------------------------------------

    def probe_state(self, params) -> np.ndarray:
        """State after the probe unitary only (before sensing), as (2, F)."""
        psi = np.zeros((1, 2, self.fock), dtype=np.complex128)
        psi[0, 0, 0] = 1.0
        for gate in self.spec.gate_sequence():
            if gate.kind == "sense":
                break
            if gate.kind == "rot_q":
                psi = self._apply_rot(psi, G.rot_matrix(*params[gate.pslice[0] : gate.pslice[1]]))
            else:
                up, down, _ = self._cd_blocks(*params[gate.pslice[0] : gate.pslice[1]])
                psi = self._apply_cd(psi, up, down)
        return psi[0]

    def probe_mean_photon(self, params) -> float:
        phi = self.probe_state(params)
        return float(np.sum(np.abs(phi) ** 2 * np.arange(self.fock)[None, :]))


def _rot_derivs(p):
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


def check_truncation(
    spec: HybridSpec, params: np.ndarray, alpha_grid: np.ndarray, margin: int = 20
) -> TruncationReport:
    """Worst-case leakage and probe photon number over a task domain, plus a
    cutoff-sensitivity re-evaluation at fock_levels + margin."""
    model = HybridModel(spec)
    inputs = np.stack([alpha_grid.real, alpha_grid.imag], axis=1)
    pf = model.probs(params, inputs)
    leak = float(model.leakage(pf).max())
    photon = model.probe_mean_photon(params)
    big = HybridModel(HybridSpec(spec.depth, spec.fock_levels + margin, spec.chi_d))
    p_small = model.excitation(pf)
    p_big = big.excitation(big.probs(params, inputs))
    drift = float(np.abs(p_small - p_big).max())
    return TruncationReport(leak, photon, spec.fock_levels, drift)


# ---------------------------------------------------------------------------
# Conventional baseline: two-mode squeezing + beam splitter + homodyne
# ---------------------------------------------------------------------------


@dataclass
class TmsBaseline:
    """TMS probe, displacement sensing on mode a, balanced beam splitter,
    homodyne of X_a and P_b.

    Homodyne means are exactly (alpha_x, alpha_y) for any squeezing; the
    measured quadrature variances are squeezed below the vacuum 1/2 by
    e^(-2 chi) / 2.
    """

    squeeze: float

    def __post_init__(self):
        if self.squeeze < 0:
            raise ValueError("squeezing strength must be non-negative")

    @property
    def mean_photon(self) -> float:
        return float(np.sinh(self.squeeze) ** 2)

    @property
    def quadrature_variance(self) -> float:
        return float(np.exp(-2 * self.squeeze) / 2)

    def means(self, alphas: np.ndarray) -> np.ndarray:
        alphas = np.asarray(alphas, dtype=complex)
        return np.stack([alphas.real, alphas.imag], axis=-1)

    def sample(self, alphas: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
        mu = self.means(alphas)
        sigma = np.sqrt(self.quadrature_variance / shots)
        return mu + sigma * rng.standard_normal(mu.shape)

    def statevector_stats(self, alpha: complex, fock_levels: int = 30):
        """Oracle: full two-mode simulation of the baseline protocol.

        The squeezer / beam-splitter matrices are cached per cutoff; only
        the sensing displacement varies with alpha.
        """
        key = fock_levels
        cache = getattr(self, "_sv_cache", None)
        if cache is None or cache[0] != key:
            f = fock_levels
            tms = G.two_mode_squeeze_matrix(self.squeeze, f)
            bs = G.beam_splitter_matrix(f)
            xa = np.kron(G.quadrature_q(f), np.eye(f))
            pb = np.kron(np.eye(f), G.quadrature_p(f))
            psi0 = np.zeros(f * f, dtype=complex)
            psi0[0] = 1.0
            cache = (key, bs, tms @ psi0, xa, pb)
            object.__setattr__(self, "_sv_cache", cache)
        _, bs, psi_tms, xa, pb = cache
        f = fock_levels
        psi = np.kron(G.displacement_matrix(alpha, f), np.eye(f)) @ psi_tms
        psi = bs @ psi
        stats = {}
        for name, op in (("x_a", xa), ("p_b", pb)):
            mean = np.vdot(psi, op @ psi).real
            second = np.vdot(psi, op @ (op @ psi)).real
            stats[name] = (float(mean), float(second - mean**2))
        return stats


def build_tms_qs(squeeze: float) -> TmsBaseline:
    return TmsBaseline(squeeze)


def match_photon_number(probe_photon: float) -> TmsBaseline:
    """TMS baseline with sinh^2(chi) equal to the hybrid probe photon number."""
    return TmsBaseline(float(np.arcsinh(np.sqrt(max(probe_photon, 0.0)))))


# ---------------------------------------------------------------------------
# Training (error loss + truncation penalty, single-shot readout, no MLP)
# ---------------------------------------------------------------------------


def expected_single_shot_error(model: HybridModel, params, inputs, labels) -> float:
    """Exact expected error of the threshold-at-half single-shot readout."""
    p1 = model.excitation(model.probs(params, inputs))
    labels = np.asarray(labels)
    return float(np.mean(np.where(labels == 1, p1, 1.0 - p1)))


def train_hybrid(spec: HybridSpec, dataset, config):
    """Supervised training of the hybrid sensor with the error-plus-penalty
    loss and straight-through gradients; best-of-restarts by exact expected
    single-shot test error."""
    from .sampling import stream
    from .training import TrainConfig, TrainResult, adam_init, adam_step, grad_circuit
    from .training import loss_error_with_penalty

    u_train, y_train = dataset.train
    u_test, y_test = dataset.test
    u_train = u_train.reshape(len(y_train), -1)
    u_test = u_test.reshape(len(y_test), -1)
    model = HybridModel(spec)

    best = None
    histories = []
    diverged = 0
    restart = 0
    attempts = 0
    while restart < config.restarts and attempts < 3 * config.restarts:
        seed_tag = attempts
        attempts += 1
        rng_init = stream(config.master_seed, 100 + seed_tag)
        params = model.init_params(rng_init)
        state = adam_init(model.n_params)
        history = {"train_loss": [], "train_err": [], "test_err": [], "lambda_max": []}
        failed = False
        for epoch in range(config.epochs):
            rng_epoch = stream(config.master_seed, 200 + seed_tag, epoch)
            pf = model.probs(params, u_train)
            p1 = model.excitation(pf)
            leak = model.leakage(pf)
            xbar = (
                p1 if config.infinite_shots
                else rng_epoch.binomial(config.shots_train, np.clip(p1, 0, 1))
                / config.shots_train
            )
            loss, dx, dleak = loss_error_with_penalty(xbar, y_train, leak)
            if not np.isfinite(loss):
                failed = True
                break
            v_full = (
                dx[:, None] * model.excitation_grad_vec(len(p1))
                + dleak[:, None] * model.leakage_grad_vec(len(p1))
            )
            grads = grad_circuit(model, params, u_train, v_full, mode=config.gradient_mode)
            params = adam_step(params, grads, state, config.lr_quantum)
            if config.record_history:
                history["train_loss"].append(loss)
                history["train_err"].append(
                    float(np.mean(np.where(y_train == 1, xbar >= 0.5, xbar < 0.5) == 0))
                )
                history["test_err"].append(
                    expected_single_shot_error(model, params, u_test, y_test)
                )
                history["lambda_max"].append(float(leak.max()))
        if failed:
            diverged += 1
            continue
        err = expected_single_shot_error(model, params, u_test, y_test)
        histories.append(history)
        if best is None or err < best[0]:
            best = (err, params, restart)
        restart += 1
    if best is None:
        raise RuntimeError("all hybrid restarts diverged")
    err, params, best_restart = best
    return TrainResult(
        params=params,
        weights=[],
        history=histories[best_restart],
        restart_histories=histories,
        best_restart=best_restart,
        diverged=diverged,
        config=config,
    )


# ---------------------------------------------------------------------------
# Serialization with truncation metadata
# ---------------------------------------------------------------------------


def save_hybrid_model(
    path: str | Path, spec: HybridSpec, params: np.ndarray, report: TruncationReport
) -> None:
    doc = {
        "depth": spec.depth,
        "fock_levels": spec.fock_levels,
        "chi_d": spec.chi_d,
        "cd_init": spec.cd_init,
        "params": np.asarray(params).tolist(),
        "truncation": {
            "leakage": report.leakage,
            "mean_photon": report.mean_photon,
            "cutoff_used": report.cutoff_used,
            "prob_drift": report.prob_drift,
            "clean": report.clean,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_hybrid_model(path: str | Path) -> tuple[HybridSpec, np.ndarray, TruncationReport]:
    doc = json.loads(Path(path).read_text())
    if not doc["truncation"]["clean"]:
        raise ValueError(f"refusing to load {path}: recorded truncation check failed")
    spec = HybridSpec(doc["depth"], doc["fock_levels"], doc["chi_d"], doc.get("cd_init", 0.5))
    report = TruncationReport(
        doc["truncation"]["leakage"],
        doc["truncation"]["mean_photon"],
        doc["truncation"]["cutoff_used"],
        doc["truncation"]["prob_drift"],
    )
    return spec, np.asarray(doc["params"]), report
