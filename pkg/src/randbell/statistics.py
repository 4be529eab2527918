"""Finite statistics: Poissonian coincidence counts, accidental subtraction, error bars.

Outcome pairs are always ordered ``(++, +-, -+, --)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from randbell.chsh import chsh_max_batch
from randbell.core import BlochVector, InvalidInputError, WernerState, correlator_tensor
from randbell.sampling import RngStream

OUTCOME_PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
_PRODUCT_SIGNS = np.array([1.0, -1.0, -1.0, 1.0])

DEFAULT_PAIR_RATE = 1000.0
# Raw visibility ~0.885 for a true visibility ~0.94: R / (R + 4A) = 0.885 / 0.94.
LAB_ACCIDENTAL_RATE = DEFAULT_PAIR_RATE * (0.94 / 0.885 - 1.0) / 4.0


class DegenerateDataError(ValueError):
    """Counts do not determine a correlator (non-positive total)."""


@dataclass(frozen=True)
class NoiseModel:
    pair_rate: float = DEFAULT_PAIR_RATE
    accidental_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.pair_rate < 0 or self.accidental_rate < 0:
            raise InvalidInputError("count rates must be non-negative")

    @classmethod
    def lab_like(cls, pair_rate: float = DEFAULT_PAIR_RATE) -> "NoiseModel":
        return cls(pair_rate, pair_rate * LAB_ACCIDENTAL_RATE / DEFAULT_PAIR_RATE)


@dataclass(frozen=True)
class CountsRecord:
    """Counts of one setting pair in the coincidence and the delayed window."""

    main: tuple[int, int, int, int]
    delayed: tuple[int, int, int, int] = (0, 0, 0, 0)
    duration: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "main", tuple(int(c) for c in self.main))
        object.__setattr__(self, "delayed", tuple(int(c) for c in self.delayed))
        if len(self.main) != 4 or len(self.delayed) != 4:
            raise InvalidInputError("a counts record holds four outcome pairs per window")
        if min(self.main + self.delayed) < 0:
            raise InvalidInputError("counts must be non-negative")
        if not self.duration > 0:
            raise InvalidInputError("duration must be positive")


@dataclass
class CountsTable:
    """Counts for every setting pair; ``main`` and ``delayed`` have shape ``(mA, mB, 4)``."""

    main: np.ndarray
    delayed: np.ndarray
    duration: float = 1.0

    @classmethod
    def from_records(cls, records: Sequence[Sequence[CountsRecord]]) -> "CountsTable":
        main = np.array([[r.main for r in row] for row in records], dtype=np.int64)
        delayed = np.array([[r.delayed for r in row] for row in records], dtype=np.int64)
        return cls(main, delayed, records[0][0].duration)

    def record(self, x: int, y: int) -> CountsRecord:
        return CountsRecord(tuple(self.main[x, y]), tuple(self.delayed[x, y]), self.duration)

    def correlators(self, corrected: bool = True) -> np.ndarray:
        counts = self.main - self.delayed if corrected else self.main
        return estimate_correlators(counts)


@dataclass(frozen=True)
class ShiftedBound:
    """Classical bound raised by ``delta`` to absorb finite-statistics uncertainty."""

    delta: float = 0.0
    bound: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.delta >= 0:
            raise InvalidInputError(f"delta must be non-negative, got {self.delta!r}")
        object.__setattr__(self, "bound", 2.0 + self.delta)


def expected_counts(E: np.ndarray, noise: NoiseModel, duration: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean main-window and delayed-window counts for correlators ``E`` (any shape)."""
    E = np.asarray(E, dtype=float)
    probs = (1.0 + E[..., None] * _PRODUCT_SIGNS) / 4.0
    acc = noise.accidental_rate * duration
    return probs * noise.pair_rate * duration + acc, np.full(probs.shape, acc)


def simulate_count_table(A: np.ndarray, B: np.ndarray, state: WernerState, noise: NoiseModel,
                         duration: float, rng: RngStream) -> CountsTable:
    """Counts for all setting pairs of ``A`` ``(mA, 3)`` and ``B`` ``(mB, 3)``.

    Draws the whole main table (C order) and then the whole delayed table.
    """
    if not duration > 0:
        raise InvalidInputError("duration must be positive")
    E = correlator_tensor(np.asarray(A, dtype=float), np.asarray(B, dtype=float), state.visibility)
    lam_main, lam_delayed = expected_counts(E, noise, duration)
    main = rng.poisson(lam_main)
    delayed = rng.poisson(lam_delayed)
    return CountsTable(main, delayed, duration)


def simulate_counts(a: BlochVector, b: BlochVector, state: WernerState, noise: NoiseModel,
                    duration: float, rng: RngStream) -> CountsRecord:
    table = simulate_count_table(a.array[None], b.array[None], state, noise, duration, rng)
    return table.record(0, 0)


def subtract_accidentals(c: CountsRecord) -> np.ndarray:
    """Main-window minus delayed-window counts; negative results are kept."""
    return np.asarray(c.main, dtype=float) - np.asarray(c.delayed, dtype=float)


def estimate_correlators(counts: np.ndarray) -> np.ndarray:
    """Vectorised :func:`estimate_correlator` over the last axis."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1)
    if np.any(total <= 0):
        raise DegenerateDataError("non-positive total counts for a setting pair")
    return np.clip((counts * _PRODUCT_SIGNS).sum(axis=-1) / total, -1.0, 1.0)


def estimate_correlator(corrected: Sequence[float]) -> float:
    """``(N++ + N-- - N+- - N-+) / N``, clamped to ``[-1, 1]``."""
    c = [float(v) for v in corrected]
    total = c[0] + c[1] + c[2] + c[3]
    if not total > 0:
        raise DegenerateDataError(f"total counts {total} must be positive")
    return min(1.0, max(-1.0, (c[0] + c[3] - c[1] - c[2]) / total))


def chsh_error_poisson(table: CountsTable, resamples: int, rng: RngStream, corrected: bool = True) -> float:
    """Monte Carlo standard deviation of the maximal CHSH value.

    Every count is redrawn as Poisson with mean equal to the observed count.
    ``resamples = 0`` disables resampling and returns 0.
    """
    if resamples == 0:
        return 0.0
    if resamples < 100:
        raise InvalidInputError(f"need at least 100 resamples, got {resamples}")
    main = rng.poisson(np.broadcast_to(table.main, (resamples,) + table.main.shape).astype(float))
    if corrected:
        delayed = rng.poisson(np.broadcast_to(table.delayed, (resamples,) + table.delayed.shape).astype(float))
        counts = main - delayed
    else:
        counts = main
    values, _ = chsh_max_batch(estimate_correlators(counts))
    return float(np.std(values, ddof=1))


def violation_probability(values: Sequence[float], bound: ShiftedBound) -> tuple[float, float]:
    """Fraction of values strictly above the shifted bound, with its binomial standard error."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise InvalidInputError("no values given")
    p = float(np.count_nonzero(values > bound.bound)) / n
    return p, math.sqrt(p * (1.0 - p) / n)


def estimate_visibility_from_mean(mean_chsh: float, reference_mean: float) -> float:
    """Visibility implied by a mean CHSH value, relative to the noiseless mean."""
    if not reference_mean > 0:
        raise InvalidInputError(f"reference mean must be positive, got {reference_mean!r}")
    return mean_chsh / reference_mean


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise InvalidInputError("n must be positive")
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return centre - half, centre + half
