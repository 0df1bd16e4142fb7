"""Task and dataset generators.

Every generator is a pure function of its parameters and seed; regenerating
with the same arguments is bit-identical.  2D phase tasks live in
[0, pi/4]^2, displacement tasks inside |alpha| <= 2 unless overridden.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifiers import THETA_MAX, RegionTask1D, equal_delta_task
from .sampling import stream


@dataclass
class TaskDataset:
    inputs: np.ndarray  # (n, ...) real inputs
    labels: np.ndarray  # (n,) integer class indices starting at 1
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.inputs[self.train_idx], self.labels[self.train_idx]

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self.inputs[self.test_idx], self.labels[self.test_idx]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels)[1:]


def _split(n: int, rng: np.random.Generator, train_fraction: float = 0.5):
    """Disjoint, exhaustive shuffle split; odd counts go floor/ceil."""
    perm = rng.permutation(n)
    k = int(np.floor(n * train_fraction))
    return np.sort(perm[:k]), np.sort(perm[k:])


def _assemble(inputs, labels, seed, rng, meta, train_fraction=0.5) -> TaskDataset:
    inputs = np.asarray(inputs)
    labels = np.asarray(labels, dtype=int)
    tr, te = _split(len(labels), rng, train_fraction)
    return TaskDataset(inputs, labels, tr, te, seed, meta)


# ---------------------------------------------------------------------------
# 1D region tasks
# ---------------------------------------------------------------------------

CANONICAL_REGION_SEED = 20250615


REGION_LENGTH_CONCENTRATION = 4.0


def make_region_task(regions: int, equal_delta: bool, seed: int) -> RegionTask1D:
    """Region boundaries; the unequal variant interleaves per-class Dirichlet
    length draws so each class still totals pi/8.  The concentration keeps
    random instances in the same difficulty class as the equal-width task."""
    if equal_delta:
        return equal_delta_task(regions)
    rng = stream(seed, 0)
    lengths = [
        rng.dirichlet(np.full(regions, REGION_LENGTH_CONCENTRATION)) * (np.pi / 8)
        for _ in range(2)
    ]
    c1, c2 = [], []
    cursor = 0.0
    for r in range(regions):
        c1.append((cursor, cursor + lengths[0][r]))
        cursor += lengths[0][r]
        c2.append((cursor, cursor + lengths[1][r]))
        cursor += lengths[1][r]
    return RegionTask1D(regions, (tuple(c1), tuple(c2)), equal_delta=False)


def canonical_region_task(regions: int = 6) -> RegionTask1D:
    return make_region_task(regions, equal_delta=False, seed=CANONICAL_REGION_SEED)


def gen_region_task(
    regions: int,
    equal_delta: bool,
    seed: int,
    n_per_class: int = 1000,
) -> tuple[RegionTask1D, TaskDataset]:
    """Task boundaries plus balanced uniform draws within each class's regions."""
    if not 1 <= regions <= 8:
        raise ValueError("regions must be in 1..8")
    task = make_region_task(regions, equal_delta, seed)
    rng = stream(seed, 1)
    thetas, labels = [], []
    for j in (1, 2):
        arr = task.intervals(j)
        widths = arr[:, 1] - arr[:, 0]
        pick = rng.choice(regions, size=2 * n_per_class, p=widths / widths.sum())
        draws = arr[pick, 0] + rng.random(2 * n_per_class) * widths[pick]
        thetas.append(draws)
        labels.append(np.full(2 * n_per_class, j))
    inputs = np.concatenate(thetas)[:, None]
    labels = np.concatenate(labels)
    order = rng.permutation(len(labels))
    meta = {"generator": "region_task", "regions": regions, "equal_delta": equal_delta,
            "domain": [0.0, THETA_MAX]}
    return task, _assemble(inputs[order], labels[order], seed, rng, meta)


# ---------------------------------------------------------------------------
# Logspirals (2- and 4-class) in the phase plane
# ---------------------------------------------------------------------------

LOGSPIRAL_DEFAULTS = {"r0_frac": 0.22, "turns": 1.0, "margin": 0.96}


def gen_logspirals(
    classes: int, n_per_class: int, noise: float, seed: int, constants: dict | None = None
) -> TaskDataset:
    """Logarithmic spiral arms r = r0 exp(b phi) centered at (pi/8, pi/8).

    4-class: one arm per class at quarter-turn offsets.  2-class: two arms
    per class, the pair separated by pi.
    """
    if classes not in (2, 4):
        raise ValueError("classes must be 2 or 4")
    cfg = dict(LOGSPIRAL_DEFAULTS, **(constants or {}))
    rng = stream(seed, 2)
    center = np.array([THETA_MAX / 2, THETA_MAX / 2])
    rmax = (THETA_MAX / 2) * cfg["margin"]
    r0 = cfg["r0_frac"] * rmax
    phi_max = 2 * np.pi * cfg["turns"]
    b = np.log(rmax / r0) / phi_max

    points, labels = [], []
    arm_offsets = [0.0, np.pi / 2, np.pi, 3 * np.pi / 2]
    arm_labels = [1, 2, 3, 4] if classes == 4 else [1, 2, 1, 2]
    if classes == 4:
        arm_counts = [n_per_class] * 4
    else:
        arm_counts = [(n_per_class + 1) // 2, (n_per_class + 1) // 2,
                      n_per_class // 2, n_per_class // 2]
    for off, lab, n_arm in zip(arm_offsets, arm_labels, arm_counts):
        phi = rng.random(n_arm) * phi_max
        r = r0 * np.exp(b * phi)
        xy = center + np.stack([r * np.cos(phi + off), r * np.sin(phi + off)], axis=1)
        xy = xy + noise * rng.standard_normal(xy.shape)
        points.append(xy)
        labels.append(np.full(n_arm, lab))
    inputs = np.clip(np.concatenate(points), 0.0, THETA_MAX)
    labels = np.concatenate(labels)
    order = rng.permutation(len(labels))
    meta = {"generator": "logspirals", "classes": classes, "noise": noise,
            "constants": cfg, "domain": [[0, THETA_MAX], [0, THETA_MAX]]}
    return _assemble(inputs[order], labels[order], seed, rng, meta)


# ---------------------------------------------------------------------------
# Displacement-plane tasks
# ---------------------------------------------------------------------------


def gen_xor_points(eta: float = 1.0) -> TaskDataset:
    """The four XOR displacements: sign(ax * ay) = -1 is class 1."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    pts = np.array([[eta, -eta], [-eta, eta], [eta, eta], [-eta, -eta]])
    labels = np.array([1, 1, 2, 2])
    idx = np.arange(4)
    meta = {"generator": "xor_points", "eta": eta}
    return TaskDataset(pts, labels, idx, idx, seed=0, meta=meta)


def gen_spirals(
    n_per_class: int, noise: float = 0.05, scale: float = 1.0, seed: int = 0, turns: float = 1.4
) -> TaskDataset:
    """Archimedean two-arm spiral in the alpha plane (arm 2 rotated by pi)."""
    rng = stream(seed, 3)
    points, labels = [], []
    for lab, off in ((1, 0.0), (2, np.pi)):
        t = np.sqrt(rng.random(n_per_class))  # denser near the center
        phi = t * 2 * np.pi * turns
        r = scale * t
        xy = np.stack([r * np.cos(phi + off), r * np.sin(phi + off)], axis=1)
        xy += noise * rng.standard_normal(xy.shape)
        points.append(xy)
        labels.append(np.full(n_per_class, lab))
    inputs = np.concatenate(points)
    labels = np.concatenate(labels)
    order = rng.permutation(len(labels))
    meta = {"generator": "spirals", "noise": noise, "scale": scale, "turns": turns}
    return _assemble(inputs[order], labels[order], seed, rng, meta)


def gen_circles(
    n_per_class: int,
    noise: float = 0.05,
    radii: tuple[float, float] = (0.45, 0.95),
    seed: int = 0,
) -> TaskDataset:
    """Two concentric annuli; class 1 inner ring, class 2 outer ring."""
    if max(radii) + 5 * noise > 2.0:
        raise ValueError("circles must stay inside |alpha| <= 2 for truncation safety")
    rng = stream(seed, 4)
    points, labels = [], []
    for lab, r0 in ((1, radii[0]), (2, radii[1])):
        phi = rng.random(n_per_class) * 2 * np.pi
        r = r0 + noise * rng.standard_normal(n_per_class)
        xy = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
        points.append(xy)
        labels.append(np.full(n_per_class, lab))
    inputs = np.concatenate(points)
    labels = np.concatenate(labels)
    order = rng.permutation(len(labels))
    meta = {"generator": "circles", "noise": noise, "radii": list(radii)}
    return _assemble(inputs[order], labels[order], seed, rng, meta)


# ---------------------------------------------------------------------------
# Synthetic spatiotemporal trials
# ---------------------------------------------------------------------------


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def gen_spatiotemporal(
    channels: int,
    steps: int = 10,
    n_trials: int = 30,
    separability: float = 1.0,
    seed: int = 0,
    theta_rms: float = 0.1,
    amp_jitter: float = 0.25,
    noise: float = 0.6,
) -> TaskDataset:
    """Two-class multichannel trials with class-specific spatial mixing and
    temporal envelopes plus i.i.d. channel noise.

    separability = 0 makes the two classes identically distributed; the knob
    rotates the class patterns apart, monotonically raising achievable
    accuracy.  Phases are scaled so the dataset RMS equals theta_rms.
    """
    if channels > 7:
        raise ValueError("channels capped at 7 (dense simulation limit)")
    rng = stream(seed, 5)
    base_u = _unit(rng.standard_normal(channels))
    alt_u = _unit(rng.standard_normal(channels))
    base_e = _unit(rng.standard_normal(steps))
    alt_e = _unit(rng.standard_normal(steps))

    def blend(a, b, frac):
        return _unit(a * (1 - frac) + b * frac)

    spatial = {1: base_u, 2: blend(base_u, alt_u, separability)}
    temporal = {1: base_e, 2: blend(base_e, alt_e, separability)}

    trials, labels = [], []
    for j in (1, 2):
        pattern = np.outer(spatial[j], temporal[j])
        for _ in range(n_trials):
            amp = 1.0 + amp_jitter * rng.standard_normal()
            theta = amp * pattern + noise / np.sqrt(channels * steps) * rng.standard_normal(
                (channels, steps)
            )
            trials.append(theta)
            labels.append(j)
    inputs = np.stack(trials)
    labels = np.asarray(labels)
    rms = float(np.sqrt(np.mean(inputs**2)))
    inputs = inputs * (theta_rms / rms)
    order = rng.permutation(len(labels))
    meta = {
        "generator": "spatiotemporal",
        "channels": channels,
        "steps": steps,
        "separability": separability,
        "theta_rms": theta_rms,
        "noise": noise,
    }
    return _assemble(inputs[order], labels[order], seed, rng, meta)


# ---------------------------------------------------------------------------
# CSV export / import with JSON metadata sidecar
# ---------------------------------------------------------------------------


def export_dataset(ds: TaskDataset, path: str | Path) -> None:
    path = Path(path)
    flat = ds.inputs.reshape(len(ds.labels), -1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "split"] + [f"u{i}" for i in range(flat.shape[1])])
        split = np.full(len(ds.labels), "test", dtype=object)
        split[ds.train_idx] = "train"
        for lab, sp, row in zip(ds.labels, split, flat):
            writer.writerow([lab, sp] + [repr(float(v)) for v in row])
    sidecar = dict(ds.meta, seed=ds.seed, shape=list(ds.inputs.shape))
    with open(path.with_suffix(".meta.json"), "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)


def import_dataset(path: str | Path) -> TaskDataset:
    path = Path(path)
    with open(path.with_suffix(".meta.json")) as fh:
        meta = json.load(fh)
    labels, splits, rows = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            labels.append(int(row[0]))
            splits.append(row[1])
            rows.append([float(v) for v in row[2:]])
    shape = meta.pop("shape")
    seed = meta.pop("seed")
    inputs = np.asarray(rows).reshape(shape)
    labels = np.asarray(labels)
    splits = np.asarray(splits)
    return TaskDataset(
        inputs,
        labels,
        np.flatnonzero(splits == "train"),
        np.flatnonzero(splits == "test"),
        seed,
        meta,
    )
