"""Cross-module invariant suite behind ``randbell check``.

Each check returns a short detail string and raises ``AssertionError`` on
failure. Sizes scale with ``n`` so the suite can run quickly or thoroughly.
"""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Callable

import numpy as np

from randbell import _backend, _fallback
from randbell.chsh import (
    BOUND_EQUALITY_TOL,
    canonicalize,
    chsh_max,
    naive_chsh_max,
    proof_witness,
)
from randbell.core import (
    BlochVector,
    MzSettings,
    WernerState,
    joint_probability,
    mz_measurement_vector,
    oracle_measurement_vector,
)
from randbell.experiments import ExperimentConfig, run_trials
from randbell.sampling import RngStream, rotations_from_uniforms, uniform_block


def _rng(n: int) -> np.random.Generator:
    return np.random.default_rng(20130301 + n)


def check_philox_oracle(n: int) -> str:
    u = uniform_block(11, 5, 4, 9, substream=2)
    for i in range(4):
        assert np.array_equal(u[i], RngStream(11, 5 + i, 2).uniform(9))
    return f"backend={_backend.BACKEND}, batched uniforms equal numpy Philox streams"


def check_backend_parity(n: int) -> str:
    if _backend.BACKEND == "python":
        return "compiled kernels not built; fallback only"
    u = _backend.uniform_block(3, 2**64 - 2, 8, 1, 13)
    assert np.array_equal(u, _fallback.uniform_block(3, 2**64 - 2, 8, 1, 13))
    E = _rng(n).uniform(-1, 1, (n, 4, 5))
    v1, w1 = _backend.chsh_max_batch(E)
    v2, w2 = _fallback.chsh_max_batch(E)
    assert np.array_equal(v1, v2) and np.array_equal(w1, w2)
    return f"compiled and numpy kernels agree on {n} matrices"


def check_mz_oracle(n: int) -> str:
    phases = _rng(n).uniform(0, 2 * math.pi, (n, 2))
    worst = max(
        float(np.max(np.abs(mz_measurement_vector(MzSettings(p1, p2)).array - oracle_measurement_vector(MzSettings(p1, p2)))))
        for p1, p2 in phases
    )
    assert worst < 1e-10, worst
    return f"closed form vs conjugation oracle, max deviation {worst:.2e}"


def check_chsh_naive(n: int) -> str:
    rng = _rng(n)
    for _ in range(n):
        E = rng.uniform(-1, 1, tuple(rng.integers(2, 6, size=2)))
        w = chsh_max(E)
        value, key = naive_chsh_max(E)
        assert w.value == value and w.key == key, (w, value, key)
    return f"exhaustive search equals naive enumeration on {n} matrices"


def check_relabel_invariance(n: int) -> str:
    rng = _rng(n)
    for _ in range(n):
        E = rng.uniform(-1, 1, (4, 4))
        F = (E * rng.choice([-1, 1], 4)[:, None] * rng.choice([-1, 1], 4)[None, :])[rng.permutation(4)][:, rng.permutation(4)]
        diff = abs(chsh_max(E).value - chsh_max(F).value)
        assert diff <= 1e-12, diff
    return f"maximum unchanged under {n} random relabellings"


def _orthogonal(n: int) -> np.ndarray:
    R = rotations_from_uniforms(_rng(n).random((n, 3)))
    R[::2] *= -1
    return R


def check_proof_witness(n: int) -> str:
    worst = 0.0
    for E in _orthogonal(n):
        pw, best = proof_witness(E), chsh_max(E)
        assert pw.value > 2 and pw.value <= best.value + 1e-12
        assert np.max(np.abs(canonicalize(E).restore() - E)) <= 1e-12
        worst = max(worst, best.value - pw.value)
    assert worst <= BOUND_EQUALITY_TOL, worst
    return f"proof witness > 2 and equal to the maximum on {n} orthogonal matrices (gap {worst:.1e})"


def check_guaranteed_violation(n: int) -> str:
    t = run_trials(ExperimentConfig(mode="triads", trials=10 * n, seed=1))
    assert np.all(t.values > 2 + BOUND_EQUALITY_TOL), t.values.min()
    return f"{10 * n} random triad pairs, smallest CHSH {t.values.min():.4f}"


def check_noise_floor(n: int) -> str:
    cfg = ExperimentConfig(mode="random", m=4, trials=10 * n, seed=2, visibility=1 / math.sqrt(2))
    t = run_trials(cfg)
    assert not np.any(t.values > 2), t.values.max()
    return f"V = 1/sqrt(2): largest CHSH {t.values.max():.6f}"


def check_probabilities(n: int) -> str:
    rng = RngStream(3, 0)
    for _ in range(n):
        a = BlochVector.from_array(rotations_from_uniforms(rng.uniform(3))[:, 0])
        b = BlochVector.from_array(rotations_from_uniforms(rng.uniform(3))[:, 0])
        s = WernerState(float(rng.uniform()))
        ps = [joint_probability(a, b, s, i, j) for i in (1, -1) for j in (1, -1)]
        assert abs(sum(ps) - 1) < 1e-12 and min(ps) >= 0 and max(ps) <= 0.5
    return f"joint probabilities normalised on {n} random inputs"


def check_thread_determinism(n: int) -> str:
    cfg = ExperimentConfig(mode="random", m=3, trials=40_000, seed=4)
    a, b = run_trials(cfg, threads=1), run_trials(cfg, threads=4)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.witness, b.witness)
    c = replace(cfg, trials=cfg.trials // 2)
    assert np.array_equal(run_trials(c, threads=3).values, a.values[: c.trials])
    return "1 and 4 worker threads give identical trials"


CHECKS: list[tuple[str, Callable[[int], str]]] = [
    ("philox-oracle", check_philox_oracle),
    ("backend-parity", check_backend_parity),
    ("mz-oracle", check_mz_oracle),
    ("chsh-naive", check_chsh_naive),
    ("relabel-invariance", check_relabel_invariance),
    ("proof-witness", check_proof_witness),
    ("guaranteed-violation", check_guaranteed_violation),
    ("noise-floor", check_noise_floor),
    ("probabilities", check_probabilities),
    ("thread-determinism", check_thread_determinism),
]


def run_checks(n: int = 1000, echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            detail = fn(n)
        except AssertionError as exc:
            ok = False
            echo(f"FAIL {name}: {exc}")
        else:
            echo(f"PASS {name}: {detail}")
    return ok
