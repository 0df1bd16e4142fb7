"""End-to-end supervised training under finite sampling.

The sampling layer is non-differentiable; gradients pass through it by the
straight-through contract (its Jacobian is taken to be the identity), so
dLoss/d(outcome probabilities) := dLoss/d(shot average) evaluated at the
sampled shot average.  Circuit-parameter derivatives of the resulting
frozen linear functional of the probabilities are then computed by the
parameter-shift rule where the generator allows it, by central differences
otherwise, or by the exact adjoint pass (all three agree on deterministic
pipelines; adjoint is the fast path for the large Pauli-string blocks).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import protocols as pr
from .sampling import stream

CD_STEP = 1e-4


# ---------------------------------------------------------------------------
# Multi-layer perceptron (plain numpy, manual backprop)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple[int, ...]  # (in, hidden..., out)

    def __post_init__(self):
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ValueError("widths must have >= 2 entries, all >= 1")

    @property
    def n_relu(self) -> int:
        return len(self.widths) - 2


def default_mlp(in_dim: int, classes: int, hidden: tuple[int, ...] = (10, 10)) -> MlpSpec:
    return MlpSpec((in_dim,) + tuple(hidden) + (classes,))


def mlp_init(spec: MlpSpec, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    weights = []
    for fan_in, fan_out in zip(spec.widths[:-1], spec.widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        weights.append((w, b))
    return weights


def mlp_forward(weights, x: np.ndarray, keep_cache: bool = False):
    """Affine-rectifier chain; the final layer is affine only."""
    x = np.atleast_2d(x)
    cache = [x]
    for i, (w, b) in enumerate(weights):
        x = x @ w.T + b
        if i < len(weights) - 1:
            x = np.maximum(x, 0.0)
        if keep_cache:
            cache.append(x)
    return (x, cache) if keep_cache else x


def mlp_backward(weights, cache, dout: np.ndarray):
    """Gradients of all weights plus the input, given dLoss/dlogits."""
    grads = [None] * len(weights)
    delta = dout
    for i in range(len(weights) - 1, -1, -1):
        w, _ = weights[i]
        x_in = cache[i]
        if i < len(weights) - 1:
            delta = delta * (cache[i + 1] > 0)
        grads[i] = (delta.T @ x_in, delta.sum(axis=0))
        delta = delta @ w
    return grads, delta


def loss_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-softmax of the true class; returns (loss, dlogits)."""
    logits = np.atleast_2d(logits)
    labels = np.asarray(labels, dtype=int)
    if labels.min() < 1 or labels.max() > logits.shape[1]:
        raise ValueError("labels must lie in 1..C")
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(labels)
    loss = -logp[np.arange(n), labels - 1].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels - 1] -= 1.0
    return float(loss), dlogits / n


def loss_error_with_penalty(x_out: np.ndarray, labels: np.ndarray, leakage: np.ndarray):
    """Binary error-style loss plus the Fock-truncation penalty.

    x_out is the (batch,) sensor output in [0, 1]; class 1 targets 0 and
    class 2 targets 1, each normalized by 2 N_samp.  The penalty is
    10 ReLU(lambda - 1e-3) per row (averaged), with lambda the top-two-level
    Fock population of the final state.
    """
    x_out = np.asarray(x_out, dtype=float)
    labels = np.asarray(labels, dtype=int)
    leakage = np.broadcast_to(np.asarray(leakage, dtype=float), x_out.shape)
    target = np.where(labels == 1, 0.0, 1.0)
    n = len(x_out)  # = 2 N_samp for balanced classes
    base = float(((x_out - target) ** 2).sum() / n)
    penalty_row = 10.0 * np.maximum(leakage - 1e-3, 0.0)
    dx = 2 * (x_out - target) / n
    dleak = np.where(leakage > 1e-3, 10.0, 0.0) / n
    return base + float(penalty_row.sum() / n), dx, dleak


def straight_through(xbar_grad: np.ndarray) -> np.ndarray:
    """Identity Jacobian for the sampling layer: dL/dprobs := dL/dxbar."""
    return np.asarray(xbar_grad, dtype=float)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


def adam_init(n: int) -> dict:
    return {"t": 0, "m": np.zeros(n), "v": np.zeros(n)}


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: dict,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> np.ndarray:
    """Standard bias-corrected Adam; state is updated in place."""
    state["t"] += 1
    state["m"] = beta1 * state["m"] + (1 - beta1) * grads
    state["v"] = beta2 * state["v"] + (1 - beta2) * grads**2
    mhat = state["m"] / (1 - beta1 ** state["t"])
    vhat = state["v"] / (1 - beta2 ** state["t"])
    return params - lr * mhat / (np.sqrt(vhat) + eps)


# ---------------------------------------------------------------------------
# Circuit gradients: parameter shift / central difference / adjoint
# ---------------------------------------------------------------------------

# shift coefficient a for parameters entering as exp(-i a p G) with G^2 = I:
# d/dp f = a * [f(p + pi/(4a)) - f(p - pi/(4a))]
_SHIFT_RULES = {"rz": 1.0, "rx": 0.5}


def parameter_shift_table(spec: pr.ProtocolSpec) -> list[tuple[str, float | None]]:
    """Per-parameter rule: ('shift', a) or ('cd', None).

    Parameters shared between several gates (mirrored hybrid blocks) and
    non-involutory generators (Pauli strings, axis angles, conditional
    displacements) fall back to central differences.
    """
    rules: list = [None] * spec.n_params
    counts = np.zeros(spec.n_params, dtype=int)
    for gate in spec.layers:
        if gate.pslice is None:
            continue
        lo, hi = gate.pslice
        counts[lo:hi] += 1
        for i in range(lo, hi):
            if gate.kind in _SHIFT_RULES:
                rules[i] = ("shift", _SHIFT_RULES[gate.kind])
            elif gate.kind == "rot" and i == lo:
                rules[i] = ("shift", 0.5)  # Omega of exp(-i Omega/2 n.sigma)
            else:
                rules[i] = ("cd", None)
    for i in range(spec.n_params):
        if counts[i] > 1:
            rules[i] = ("cd", None)
    return rules


def grad_circuit(
    model,
    params: np.ndarray,
    inputs: np.ndarray,
    dloss_dprob: np.ndarray,
    mode: str = "parameter_shift",
    notices: list | None = None,
) -> np.ndarray:
    """Gradient of the frozen linear functional sum(dloss_dprob * probs).

    model is a QubitModel/HybridModel adapter; dloss_dprob comes from the
    straight-through contract and has the model's output shape.
    """
    if mode == "adjoint":
        return model.adjoint(params, inputs, dloss_dprob)

    def surrogate(p):
        return float((model.probs(p, inputs) * dloss_dprob).sum())

    rules = model.shift_rules()
    grads = np.zeros(len(params))
    for i, rule in enumerate(rules):
        kind, a = rule
        if mode == "central_difference" or kind == "cd":
            if mode == "parameter_shift" and kind == "cd" and notices is not None:
                notices.append(i)
            h = CD_STEP
            pp, pm = params.copy(), params.copy()
            pp[i] += h
            pm[i] -= h
            grads[i] = (surrogate(pp) - surrogate(pm)) / (2 * h)
        else:
            s = np.pi / (4 * a)
            pp, pm = params.copy(), params.copy()
            pp[i] += s
            pm[i] -= s
            grads[i] = a * (surrogate(pp) - surrogate(pm))
    return grads


class QubitModel:
    """Adapter exposing a qubit ProtocolSpec to the training loop.

    output 'bitstring' feeds the 2^M shot-averaged outcome frequencies to
    the postprocessor; 'bits' feeds per-qubit excitation bits (spatiotemporal
    record format).
    """

    def __init__(self, spec: pr.ProtocolSpec, output: str = "bitstring"):
        if output not in ("bitstring", "bits"):
            raise ValueError("output must be 'bitstring' or 'bits'")
        self.spec = spec
        self.output = output
        self._bits = pr.bit_table(spec.layout)
        self._rules = None

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    @property
    def n_out(self) -> int:
        return self._bits.shape[0] if self.output == "bitstring" else self._bits.shape[1]

    def init_params(self, rng: np.random.Generator, pauli_init: str = "haar") -> np.ndarray:
        return pr.init_params(self.spec, rng, pauli_init)

    def joint_probs(self, params, inputs) -> np.ndarray:
        return pr.forward_probs(self.spec, params, inputs)

    def probs(self, params, inputs) -> np.ndarray:
        joint = self.joint_probs(params, inputs)
        return joint if self.output == "bitstring" else joint @ self._bits

    def amp_grad(self, dloss_dprob: np.ndarray) -> np.ndarray:
        """Map output-space gradient to per-amplitude |psi_k|^2 gradient."""
        if self.output == "bitstring":
            return dloss_dprob
        return dloss_dprob @ self._bits.T

    def adjoint(self, params, inputs, dloss_dprob) -> np.ndarray:
        return pr.adjoint_gradient(self.spec, params, inputs, self.amp_grad(dloss_dprob))

    def shift_rules(self):
        if self._rules is None:
            self._rules = parameter_shift_table(self.spec)
        return self._rules

    def sample_xbar(self, joint: np.ndarray, shots: int, rng: np.random.Generator):
        """Shot averages per row: outcome frequencies or mean bits."""
        batch, dim = joint.shape
        cdf = np.cumsum(joint, axis=1)
        cdf[:, -1] = np.maximum(cdf[:, -1], 1.0)
        u = rng.random((batch, shots))
        draws = (u[:, :, None] > cdf[:, None, :]).sum(axis=2)  # (batch, shots)
        if self.output == "bitstring":
            xbar = np.zeros((batch, dim))
            for s in range(shots):
                xbar[np.arange(batch), draws[:, s]] += 1.0
            return xbar / shots
        return self._bits[draws].mean(axis=1)  # (batch, M)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 2000
    lr_quantum: float = 1e-4
    lr_classical: float = 3e-3
    shots_train: int = 1
    shots_infer: int = 1
    restarts: int = 10
    master_seed: int = 0
    gradient_mode: str = "parameter_shift"  # | central_difference | adjoint
    pauli_init: str = "haar"
    mlp_hidden: tuple[int, ...] = (10, 10)
    batch_size: int | None = None  # None = full batch
    infinite_shots: bool = False  # feed exact probabilities (oracle mode)
    eval_every: int = 1
    record_history: bool = True

    def __post_init__(self):
        if self.shots_train < 1 or self.lr_quantum <= 0 or self.lr_classical <= 0:
            raise ValueError("shots_train >= 1 and positive learning rates required")


@dataclass
class TrainResult:
    params: np.ndarray
    weights: list
    history: dict
    restart_histories: list
    best_restart: int
    diverged: int
    config: TrainConfig


def _classify(logits: np.ndarray) -> np.ndarray:
    return np.argmax(logits, axis=1) + 1


def _pack(arrs) -> np.ndarray:
    return np.concatenate([a.ravel() for pair in arrs for a in pair])


def _unpack(flat: np.ndarray, template) -> list:
    out, pos = [], 0
    for w, b in template:
        nw, nb = w.size, b.size
        out.append((flat[pos : pos + nw].reshape(w.shape), flat[pos + nw : pos + nw + nb]))
        pos += nw + nb
    return out


def train_end_to_end(model, dataset, config: TrainConfig, classes: int | None = None):
    """Fresh shot noise per row each epoch; straight-through + exact MLP
    backprop + Adam with separate quantum/classical learning rates; returns
    the best-of-restarts model by held-out error."""
    u_train, y_train = dataset.train
    u_test, y_test = dataset.test
    u_train = u_train.reshape(len(y_train), -1)
    u_test = u_test.reshape(len(y_test), -1)
    classes = classes or int(max(y_train.max(), y_test.max()))
    mlp_spec = MlpSpec((model.n_out,) + tuple(config.mlp_hidden) + (classes,))

    best = None
    histories = []
    diverged = 0
    restart = 0
    attempts = 0
    while restart < config.restarts and attempts < 3 * config.restarts:
        seed_tag = attempts
        attempts += 1
        rng_init = stream(config.master_seed, 100 + seed_tag)
        params = model.init_params(rng_init, config.pauli_init)
        weights = mlp_init(mlp_spec, rng_init)
        # absorb a feature standardization (statistics of the initial model's
        # sampled shot averages on the training set) into the first affine
        # layer; raw outcome frequencies are small and offset, which stalls
        # the postprocessor
        joint0 = model.joint_probs(params, u_train)
        x0 = (
            model.probs(params, u_train)
            if config.infinite_shots
            else model.sample_xbar(joint0, config.shots_train,
                                   stream(config.master_seed, 500 + seed_tag))
        )
        mu, sd = x0.mean(axis=0), np.maximum(x0.std(axis=0), 0.05)
        w1, b1 = weights[0]
        weights[0] = (w1 / sd, b1 - (w1 / sd) @ mu)
        flat_w = _pack(weights)
        qstate = adam_init(model.n_params)
        cstate = adam_init(flat_w.size)
        history = {"train_loss": [], "train_err": [], "test_err": [], "lambda_max": []}
        failed = False
        for epoch in range(config.epochs):
            rng_epoch = stream(config.master_seed, 200 + seed_tag, epoch)
            if config.batch_size and config.batch_size < len(y_train):
                pick = rng_epoch.choice(len(y_train), size=config.batch_size, replace=False)
            else:
                pick = slice(None)
            ub, yb = u_train[pick], y_train[pick]
            joint = model.joint_probs(params, ub)
            xbar = (
                model.probs(params, ub)
                if config.infinite_shots
                else model.sample_xbar(joint, config.shots_train, rng_epoch)
            )
            logits, cache = mlp_forward(weights, xbar, keep_cache=True)
            loss, dlogits = loss_cross_entropy(logits, yb)
            if not np.isfinite(loss):
                failed = True
                break
            wgrads, dxbar = mlp_backward(weights, cache, dlogits)
            dprob = straight_through(dxbar)
            qgrad = grad_circuit(model, params, ub, dprob, mode=config.gradient_mode)
            params = adam_step(params, qgrad, qstate, config.lr_quantum)
            flat_w = adam_step(flat_w, _pack(wgrads), cstate, config.lr_classical)
            weights = _unpack(flat_w, weights)
            if config.record_history:
                train_err = float(np.mean(_classify(logits) != yb))
                test_err = evaluate_error(
                    model, params, weights, u_test, y_test, config.shots_infer,
                    stream(config.master_seed, 300 + seed_tag, epoch),
                    infinite_shots=config.infinite_shots,
                )
                history["train_loss"].append(loss)
                history["train_err"].append(train_err)
                history["test_err"].append(test_err)
                history["lambda_max"].append(getattr(model, "last_leakage", 0.0))
        if failed:
            diverged += 1
            continue
        final_err = evaluate_error(
            model, params, weights, u_test, y_test, config.shots_infer,
            stream(config.master_seed, 400 + seed_tag), repeats=8,
            infinite_shots=config.infinite_shots,
        )
        histories.append(history)
        if best is None or final_err < best[0]:
            best = (final_err, params, weights, restart)
        restart += 1
    if best is None:
        raise RuntimeError("all restarts diverged")
    _, params, weights, best_restart = best
    return TrainResult(
        params=params,
        weights=weights,
        history=histories[best_restart],
        restart_histories=histories,
        best_restart=best_restart,
        diverged=diverged,
        config=config,
    )


def save_history_csv(history: dict, path) -> None:
    """Training history as CSV: epoch, train_loss, train_err, test_err, lambda_max."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "train_err", "test_err", "lambda_max"])
        for i in range(len(history["train_loss"])):
            writer.writerow(
                [i, f"{history['train_loss'][i]:.10g}", f"{history['train_err'][i]:.10g}",
                 f"{history['test_err'][i]:.10g}", f"{history['lambda_max'][i]:.10g}"]
            )


def save_checkpoint(path, spec_doc: dict, result: "TrainResult") -> None:
    """Model checkpoint: protocol serialization plus MLP weights."""
    import json

    doc = {
        "protocol": spec_doc,
        "params": np.asarray(result.params).tolist(),
        "mlp_weights": [[w.tolist(), b.tolist()] for w, b in result.weights],
        "best_restart": result.best_restart,
        "diverged": result.diverged,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    import json

    with open(path) as fh:
        doc = json.load(fh)
    params = np.asarray(doc["params"])
    weights = [(np.asarray(w), np.asarray(b)) for w, b in doc["mlp_weights"]]
    return doc["protocol"], params, weights


def evaluate_error(
    model,
    params,
    weights,
    u,
    y,
    shots: int,
    rng: np.random.Generator,
    repeats: int = 1,
    infinite_shots: bool = False,
) -> float:
    """Sampled-inference classification error, averaged over repeats."""
    u = u.reshape(len(y), -1)
    joint = model.joint_probs(params, u)
    errs = []
    for _ in range(repeats):
        xbar = (
            model.probs(params, u)
            if infinite_shots
            else model.sample_xbar(joint, shots, rng)
        )
        logits = mlp_forward(weights, xbar)
        errs.append(float(np.mean(_classify(logits) != y)))
    return float(np.mean(errs))
