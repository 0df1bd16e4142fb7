"""Decision layers for single-qubit binary tasks and bosonic estimators.

The exact Bayes classifier integrates the binomial likelihood of the
excitation count over each class's phase regions; its error is computed by
exact enumeration over counts.  The approximate Gaussian classifier gives
the closed-form error expression for equal-width region tasks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

THETA_MAX = np.pi / 4
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class RegionTask1D:
    """Binary task over theta in [0, pi/4] with R alternating regions per class.

    boundaries[j] is an (R, 2) array of [lo, hi] intervals for class j+1.
    Each class's intervals are disjoint and total pi/8.
    """

    regions: int
    boundaries: tuple  # (class1 intervals, class2 intervals)
    equal_delta: bool = False

    def __post_init__(self):
        for intervals in self.boundaries:
            arr = np.asarray(intervals)
            if arr.shape != (self.regions, 2):
                raise ValueError("each class needs R intervals")
            total = float((arr[:, 1] - arr[:, 0]).sum())
            if abs(total - np.pi / 8) > 1e-9:
                raise ValueError(f"class intervals must total pi/8, got {total}")

    @property
    def delta(self) -> float:
        return THETA_MAX / (2 * self.regions)

    def intervals(self, label: int) -> np.ndarray:
        return np.asarray(self.boundaries[label - 1], dtype=float)

    def label_of(self, theta: float) -> int:
        for j in (1, 2):
            arr = self.intervals(j)
            if np.any((theta >= arr[:, 0]) & (theta <= arr[:, 1])):
                return j
        # boundary points between intervals: attribute to the nearer lower class
        return 1

    def to_document(self) -> dict:
        return {
            "regions": self.regions,
            "equal_delta": self.equal_delta,
            "class1": np.asarray(self.boundaries[0]).tolist(),
            "class2": np.asarray(self.boundaries[1]).tolist(),
        }

    @classmethod
    def from_document(cls, doc: dict) -> "RegionTask1D":
        return cls(
            regions=doc["regions"],
            boundaries=(tuple(map(tuple, doc["class1"])), tuple(map(tuple, doc["class2"]))),
            equal_delta=doc.get("equal_delta", False),
        )


def equal_delta_task(regions: int) -> RegionTask1D:
    """Alternating equal-width regions: class 1 owns [0, delta), class 2 [delta, 2 delta), ..."""
    delta = THETA_MAX / (2 * regions)
    c1, c2 = [], []
    for r in range(regions):
        c1.append((2 * r * delta, (2 * r + 1) * delta))
        c2.append(((2 * r + 1) * delta, (2 * r + 2) * delta))
    return RegionTask1D(regions, (tuple(c1), tuple(c2)), equal_delta=True)


def _adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL, depth: int = 24):
    """Adaptive Simpson for a vector-valued integrand (max-norm error control)."""
    fa, fm, fb = f(a), f((a + b) / 2), f(b)
    whole = (b - a) / 6 * (fa + 4 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        err = np.max(np.abs(left + right - whole))
        if depth <= 0 or err < 15 * tol:
            return left + right + (left + right - whole) / 15
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth - 1
        )

    return recurse(a, b, fa, fm, fb, whole, tol, depth)


def _class_masses(shots: int, task: RegionTask1D, response) -> np.ndarray:
    """masses[j-1, y] = integral over R_j of binom_pmf(y; S, x(theta)) d theta."""
    ys = np.arange(shots + 1)

    def integrand(theta):
        x = np.clip(response(theta), 0.0, 1.0)
        return stats.binom.pmf(ys, shots, x)

    out = np.zeros((2, shots + 1))
    for j in (1, 2):
        for lo, hi in task.intervals(j):
            out[j - 1] += _adaptive_simpson(integrand, float(lo), float(hi))
    return out


def bayes_classify(y: int, shots: int, task: RegionTask1D, response) -> int:
    """argmax_j integral_Rj binom(y; S, x(theta)) d theta, ties toward class 1."""
    if not 0 <= y <= shots:
        raise ValueError("count must lie in [0, S]")
    masses = _class_masses(shots, task, response)
    return 1 if masses[0, y] >= masses[1, y] else 2


def bayes_error(shots: int, task: RegionTask1D, response) -> float:
    """Exact Bayes classification error by enumeration over all counts.

    Joint mass P(Y = y, C = j) = 0.5 * (8/pi) * integral_Rj pmf; for each y
    the classifier keeps the larger class, the opposite class's mass is the
    error contribution.
    """
    masses = _class_masses(shots, task, response) * 0.5 / (np.pi / 8)
    return float(np.minimum(masses[0], masses[1]).sum())


def gaussian_error_formula(regions: int, shots: int, asymptotic: bool = False) -> float:
    """Closed-form error of the Gaussian classifier for equal-width tasks.

    Valid in the regime sqrt(S) >~ R (warns outside); the asymptotic flag
    keeps only the 1/sqrt(2 pi S) term dominating at large S.
    """
    if np.sqrt(shots) < regions:
        warnings.warn(
            f"gaussian_error_formula outside validity regime: sqrt(S)={np.sqrt(shots):.1f} < R={regions}",
            stacklevel=2,
        )
    delta = THETA_MAX / (2 * regions)
    pref = (2 / THETA_MAX) * (2 * regions - 1) / 2
    tail = 1.0 / np.sqrt(2 * np.pi * shots)
    if asymptotic:
        return float(pref * tail)
    erf_term = 2 * delta * (
        special.erf(2 * delta * np.sqrt(2 * shots)) - special.erf(delta * np.sqrt(2 * shots))
    )
    exp_term = tail * (
        1 + np.exp(-8 * shots * delta**2) - 2 * np.exp(-2 * shots * delta**2)
    )
    return float(pref * (erf_term + exp_term))


def gaussian_classifier_mc(
    regions: int, shots: int, trials: int, rng: np.random.Generator
) -> float:
    """Monte-Carlo oracle of the Gaussian classifier error under its own model.

    Draws theta uniformly per class, Xbar ~ Normal(linearized mean, 1/(4S)),
    and counts an error whenever Xbar lands in the opposite class's union of
    linearized response intervals (mass outside every interval is not an
    error event, matching the closed-form error integrals).
    """
    task = equal_delta_task(regions)
    labels = rng.integers(1, 3, size=trials)
    thetas = np.empty(trials)
    for j in (1, 2):
        mask = labels == j
        arr = task.intervals(j)
        pick = rng.integers(0, regions, size=mask.sum())
        thetas[mask] = arr[pick, 0] + rng.random(mask.sum()) * (arr[pick, 1] - arr[pick, 0])
    # linearized response: x = 1/2 + (theta - pi/8); classify on xbar via theta-hat
    xbar = 0.5 + (thetas - np.pi / 8) + rng.standard_normal(trials) / np.sqrt(4 * shots)
    theta_hat = xbar - 0.5 + np.pi / 8
    errors = 0
    for j in (1, 2):
        opp = task.intervals(3 - j)
        mask = labels == j
        th = theta_hat[mask]
        in_opp = np.zeros(mask.sum(), dtype=bool)
        for lo, hi in opp:
            in_opp |= (th >= lo) & (th <= hi)
        errors += int(in_opp.sum())
    return errors / trials


def threshold_classify(estimate: float) -> int:
    """Sign threshold: negative -> class 1, zero or positive -> class 2."""
    return 1 if estimate < 0 else 2
