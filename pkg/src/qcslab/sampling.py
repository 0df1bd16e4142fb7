"""Finite-shot sampling of outcome distributions.

All randomness flows through counter-based Philox streams derived from a
master seed and integer stream labels, so any experiment row can be
resampled independently and reproducibly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def stream(master_seed: int, *labels: int) -> np.random.Generator:
    """Child RNG stream for (master_seed, *labels); safe to split in parallel."""
    seq = np.random.SeedSequence((int(master_seed),) + tuple(int(x) for x in labels))
    return np.random.Generator(np.random.Philox(seq))


def categorical(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF categorical draws; tie rule: first index with cdf >= u."""
    cdf = np.cumsum(probs)
    cdf[-1] = max(cdf[-1], 1.0)  # guard against rounding at the top
    u = rng.random(shots)
    return np.searchsorted(cdf, u, side="left").astype(np.int64)


@dataclass
class ShotRecord:
    """Raw per-shot outcomes and their shot average."""

    shots: int
    raw: np.ndarray  # (S,) outcome indices or (S, bits) bit matrix
    xbar: np.ndarray
    seed: tuple


def sample(dist, shots: int, rng: np.random.Generator, seed: tuple = ()) -> ShotRecord:
    """i.i.d. categorical sampling of an OutcomeDistribution (or prob vector)."""
    probs = np.asarray(getattr(dist, "probs", dist), dtype=float)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    draws = categorical(probs, shots, rng)
    xbar = np.bincount(draws, minlength=probs.size).astype(float) / shots
    return ShotRecord(shots=shots, raw=draws, xbar=xbar, seed=seed)


def sample_count(x: float, shots: int, rng: np.random.Generator) -> int:
    """Binomially distributed excitation count Y = S * Xbar for a binary outcome."""
    rec = sample(np.array([1.0 - x, x]), shots, rng)
    return int(round(rec.xbar[1] * shots))


def sample_bits(probs: np.ndarray, bit_table: np.ndarray, shots: int,
                rng: np.random.Generator) -> np.ndarray:
    """Projective multi-qubit measurement emitted as per-qubit bits.

    bit_table maps outcome index -> bit vector; one joint draw per shot.
    """
    draws = categorical(probs, shots, rng)
    return bit_table[draws]


def binomial_variance(xbar: np.ndarray, shots: int) -> np.ndarray:
    """Per-component sampling-noise variance estimate xbar (1 - xbar) / S."""
    return xbar * (1.0 - xbar) / shots
