"""Trial runners and violation-probability curves.

Each trial ``t`` draws its settings from ``RngStream(seed, t, SETTINGS)``,
its photon counts from substream ``COUNTS`` and its error-bar resamples from
``RESAMPLING``. Uncalibrated devices (``voltages`` mode) get one set of
phase-shifter calibrations per experiment from ``RngStream(seed, 0,
CALIBRATION)``. Trials are processed in fixed-size chunks that may run on
several threads; results are assembled in trial order, so the output does
not depend on the thread count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from randbell.chsh import TSIRELSON, ChshWitness, chsh_max_batch
from randbell.core import (
    TWO_PI,
    InvalidInputError,
    MzSettings,
    PhaseShifterCal,
    WernerState,
    correlator_tensor,
    mz_bloch_array,
    mz_measurement_vector,
    phase_from_voltage,
)
from randbell.sampling import (
    CALIBRATION,
    COUNTS,
    RESAMPLING,
    SETTINGS,
    RngStream,
    random_triad,
    random_unbiased_pair,
    random_unit_vector,
    random_voltages,
    rotations_from_uniforms,
    uniform_block,
    unit_vectors_from_uniforms,
)
from randbell.statistics import (
    NoiseModel,
    ShiftedBound,
    chsh_error_poisson,
    simulate_count_table,
    violation_probability,
)

MODES = ("triads", "random", "unbiased-pairs", "voltages")
FIXED_M = {"triads": 3, "unbiased-pairs": 2}

THREADS_ENV = "RANDBELL_THREADS"
EXACT_CHUNK = 1 << 15
COUNTS_CHUNK = 64


class ConfigError(ValueError):
    """Inconsistent experiment configuration."""


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{THREADS_ENV} must be at least 1, got {n}")
        return n
    return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class CountsConfig:
    noise: NoiseModel = NoiseModel()
    duration: float = 1.0
    corrected: bool = True
    resamples: int = 0

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ConfigError("counting duration must be positive")
        if self.resamples != 0 and self.resamples < 100:
            raise ConfigError("resamples must be 0 (off) or at least 100")


@dataclass(frozen=True)
class DeviceConfig:
    """Uncalibrated phase shifters: voltage range and the spread of the quadratic law.

    ``calibrations`` pins the four shifters (Alice 1, Alice 2, Bob 1, Bob 2);
    otherwise alpha is uniform on ``[0, 2 pi)`` and beta uniform on
    ``beta_center +- beta_halfwidth``, drawn once per experiment.
    """

    vmax: float = 7.0
    beta_center: float = 0.15
    beta_halfwidth: float = 0.02
    calibrations: tuple[PhaseShifterCal, ...] | None = None

    def __post_init__(self) -> None:
        if not self.vmax > 0:
            raise ConfigError("vmax must be positive")
        if not 0 <= self.beta_halfwidth < self.beta_center:
            raise ConfigError("beta band must stay positive")
        if self.calibrations is not None and len(self.calibrations) != 4:
            raise ConfigError("exactly four phase-shifter calibrations are needed")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "triads"
    m: int = 3
    visibility: float = 1.0
    trials: int = 100
    bound: ShiftedBound = ShiftedBound()
    counts: CountsConfig | None = None
    seed: int = 0
    device: DeviceConfig = DeviceConfig()

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.m < 2:
            raise ConfigError(f"m must be at least 2, got {self.m}")
        fixed = FIXED_M.get(self.mode)
        if fixed is not None and self.m != fixed:
            raise ConfigError(f"mode {self.mode!r} requires m = {fixed}, got {self.m}")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if not 0 <= self.visibility <= 1:
            raise ConfigError(f"visibility must lie in [0, 1], got {self.visibility}")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def state(self) -> WernerState:
        return WernerState(self.visibility)


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    chsh: ChshWitness
    chsh_error: float | None
    violated: bool


@dataclass
class TrialTable:
    """Column store of per-trial results; iterating yields :class:`TrialResult`."""

    values: np.ndarray
    witness: np.ndarray
    errors: np.ndarray
    bound: ShiftedBound

    def __len__(self) -> int:
        return len(self.values)

    @property
    def violated(self) -> np.ndarray:
        return self.values > self.bound.bound

    def __getitem__(self, i: int) -> TrialResult:
        w = self.witness[i]
        err = float(self.errors[i])
        return TrialResult(
            int(i),
            ChshWitness(*(int(k) for k in w), value=float(self.values[i])),
            None if math.isnan(err) else err,
            bool(self.values[i] > self.bound.bound),
        )

    def __iter__(self) -> Iterator[TrialResult]:
        return (self[i] for i in range(len(self)))


@dataclass
class ViolationCurve:
    axis_name: str
    axis: np.ndarray
    probability: np.ndarray
    stderr: np.ndarray


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray = field(repr=False)


# -- settings ----------------------------------------------------------------

def settings_uniforms(mode: str, m: int) -> int:
    """Uniforms consumed per trial (Alice first, then Bob)."""
    if mode in ("triads", "unbiased-pairs"):
        return 6
    return 4 * m


def device_calibrations(cfg: ExperimentConfig) -> tuple[PhaseShifterCal, ...]:
    dev = cfg.device
    if dev.calibrations is not None:
        return dev.calibrations
    u = RngStream(cfg.seed, 0, CALIBRATION).uniform(8)
    return tuple(
        PhaseShifterCal(TWO_PI * u[2 * k], dev.beta_center + dev.beta_halfwidth * (2 * u[2 * k + 1] - 1))
        for k in range(4)
    )


def _wrap(phi: np.ndarray) -> np.ndarray:
    r = np.mod(phi, TWO_PI)
    r[r >= TWO_PI] = 0.0
    return r


def _voltage_directions(v: np.ndarray, cal1: PhaseShifterCal, cal2: PhaseShifterCal) -> np.ndarray:
    phi1 = _wrap(cal1.alpha + cal1.beta * v[..., 0] * v[..., 0])
    phi2 = _wrap(cal2.alpha + cal2.beta * v[..., 1] * v[..., 1])
    return mz_bloch_array(phi1, phi2)


def directions_from_uniforms(cfg: ExperimentConfig, u: np.ndarray, cals=None) -> tuple[np.ndarray, np.ndarray]:
    """Alice's and Bob's measurement directions, each ``(n, m, 3)``, from per-trial uniforms."""
    n, m = len(u), cfg.m
    if cfg.mode in ("triads", "unbiased-pairs"):
        RA = rotations_from_uniforms(u[:, 0:3]).transpose(0, 2, 1)
        RB = rotations_from_uniforms(u[:, 3:6]).transpose(0, 2, 1)
        return np.ascontiguousarray(RA[:, :m]), np.ascontiguousarray(RB[:, :m])
    half = u[:, : 2 * m].reshape(n, m, 2), u[:, 2 * m: 4 * m].reshape(n, m, 2)
    if cfg.mode == "random":
        return unit_vectors_from_uniforms(half[0]), unit_vectors_from_uniforms(half[1])
    cals = cals or device_calibrations(cfg)
    vmax = cfg.device.vmax
    return (_voltage_directions(vmax * half[0], cals[0], cals[1]),
            _voltage_directions(vmax * half[1], cals[2], cals[3]))


def trial_settings(cfg: ExperimentConfig, trial: int) -> tuple[np.ndarray, np.ndarray]:
    """Settings of one trial via the public samplers (reference for the batched path)."""
    rng = RngStream(cfg.seed, trial, SETTINGS)
    if cfg.mode == "triads":
        A, B = random_triad(rng), random_triad(rng)
        return np.array([v.array for v in A]), np.array([v.array for v in B])
    if cfg.mode == "unbiased-pairs":
        A, B = random_unbiased_pair(rng), random_unbiased_pair(rng)
        return np.array([v.array for v in A]), np.array([v.array for v in B])
    if cfg.mode == "random":
        vs = [random_unit_vector(rng).array for _ in range(2 * cfg.m)]
        return np.array(vs[: cfg.m]), np.array(vs[cfg.m:])
    cals = device_calibrations(cfg)
    out = []
    for party in range(2):
        volts = random_voltages(rng, 2 * cfg.m, cfg.device.vmax)
        c1, c2 = cals[2 * party], cals[2 * party + 1]
        out.append(np.array([
            mz_measurement_vector(MzSettings(phase_from_voltage(volts[2 * x], c1),
                                             phase_from_voltage(volts[2 * x + 1], c2))).array
            for x in range(cfg.m)
        ]))
    return out[0], out[1]


# -- trial execution ---------------------------------------------------------

def _chunk_settings(cfg: ExperimentConfig, start: int, count: int, cals) -> tuple[np.ndarray, np.ndarray]:
    u = uniform_block(cfg.seed, start, count, settings_uniforms(cfg.mode, cfg.m), SETTINGS)
    return directions_from_uniforms(cfg, u, cals)


def _run_chunk(cfg: ExperimentConfig, start: int, count: int, cals) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    A, B = _chunk_settings(cfg, start, count, cals)
    errors = np.full(count, np.nan)
    if cfg.counts is None:
        E = correlator_tensor(A, B, cfg.visibility)
    else:
        cc = cfg.counts
        E = np.empty((count, cfg.m, cfg.m))
        for i in range(count):
            t = start + i
            table = simulate_count_table(A[i], B[i], cfg.state, cc.noise, cc.duration, RngStream(cfg.seed, t, COUNTS))
            E[i] = table.correlators(cc.corrected)
            if cc.resamples:
                errors[i] = chsh_error_poisson(table, cc.resamples, RngStream(cfg.seed, t, RESAMPLING), cc.corrected)
    values, witness = chsh_max_batch(E)
    return values, witness.astype(np.int16), errors


def _chunks(trials: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(size, trials - lo)) for lo in range(0, trials, size)]


def run_trials(cfg: ExperimentConfig, threads: int | None = None) -> TrialTable:
    """Run ``cfg.trials`` independent Bell tests and report the maximal CHSH value of each."""
    threads = threads or default_threads()
    cals = device_calibrations(cfg) if cfg.mode == "voltages" else None
    size = EXACT_CHUNK if cfg.counts is None else COUNTS_CHUNK
    chunks = _chunks(cfg.trials, size)
    if threads == 1 or len(chunks) == 1:
        parts = [_run_chunk(cfg, lo, n, cals) for lo, n in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _run_chunk(cfg, c[0], c[1], cals), chunks))
    values = np.concatenate([p[0] for p in parts])
    witness = np.concatenate([p[1] for p in parts])
    errors = np.concatenate([p[2] for p in parts])
    return TrialTable(values, witness, errors, cfg.bound)


def violation_curve_vs_visibility(cfg: ExperimentConfig, v_grid: Sequence[float],
                                  threads: int | None = None) -> ViolationCurve:
    """Violation probability at each visibility.

    Without counts, one set of noiseless trials is rescaled to every grid
    point since correlators are linear in V. With counts, each point is
    simulated afresh.
    """
    grid = np.asarray(v_grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0) or np.any(grid > 1):
        raise ConfigError("visibility grid must be non-empty and within [0, 1]")
    probs, errs = [], []
    if cfg.counts is None:
        base = run_trials(replace(cfg, visibility=1.0), threads).values
        for v in grid:
            p, e = violation_probability(v * base, cfg.bound)
            probs.append(p)
            errs.append(e)
    else:
        for v in grid:
            p, e = violation_probability(run_trials(replace(cfg, visibility=float(v)), threads).values, cfg.bound)
            probs.append(p)
            errs.append(e)
    return ViolationCurve("visibility", grid, np.array(probs), np.array(errs))


def violation_curve_vs_m(cfg: ExperimentConfig, m_grid: Sequence[int], threads: int | None = None) -> ViolationCurve:
    """Violation probability for each number of settings per party, at fixed visibility."""
    if cfg.mode in FIXED_M:
        raise ConfigError(f"mode {cfg.mode!r} fixes m; sweep m with 'random' or 'voltages'")
    grid = [int(m) for m in m_grid]
    if not grid or min(grid) < 2:
        raise ConfigError("m grid must be non-empty with m >= 2")
    probs, errs = [], []
    for m in grid:
        p, e = violation_probability(run_trials(replace(cfg, m=m), threads).values, cfg.bound)
        probs.append(p)
        errs.append(e)
    return ViolationCurve("m", np.array(grid, dtype=float), np.array(probs), np.array(errs))


def distribution_histogram(values: Sequence[float], bin_width: float) -> Histogram:
    """Histogram over ``[0, 2 sqrt 2]``; the last bin may be narrower.

    Values outside the range (finite-count noise can push a value past the
    Tsirelson bound) are counted in the nearest end bin.
    """
    if not bin_width > 0:
        raise InvalidInputError("bin width must be positive")
    nbins = max(1, math.ceil(TSIRELSON / bin_width - 1e-12))
    edges = np.minimum(np.arange(nbins + 1) * bin_width, TSIRELSON)
    edges[-1] = TSIRELSON
    vals = np.clip(np.asarray(values, dtype=float), 0.0, TSIRELSON)
    counts, _ = np.histogram(vals, bins=edges)
    return Histogram(edges, counts)


def reference_mean_chsh(trials: int = 10**7, seed: int = 0, threads: int | None = None) -> float:
    """Mean maximal CHSH value of random triads on a pure singlet."""
    cfg = ExperimentConfig(mode="triads", m=3, visibility=1.0, trials=trials, seed=seed)
    return float(np.mean(run_trials(cfg, threads).values))
