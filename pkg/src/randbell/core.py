"""Bloch-sphere geometry, Werner-state correlators and the Mach-Zehnder device model."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# user-supplied geometry vs internally generated math
GEOMETRY_TOL = 1e-9
INTERNAL_TOL = 1e-12

_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class InvalidInputError(ValueError):
    """An argument violates an operation's precondition."""


def wrap_angle(phi: float) -> float:
    """Reduce an angle into ``[0, 2*pi)``."""
    r = float(phi) % TWO_PI
    # tiny negative inputs round up to exactly 2*pi
    return 0.0 if r >= TWO_PI else r


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm2 = self.x * self.x + self.y * self.y + self.z * self.z
        if not abs(norm2 - 1.0) <= GEOMETRY_TOL:
            raise InvalidInputError(f"Bloch vector norm^2 {norm2!r} differs from 1 by more than {GEOMETRY_TOL}")

    @classmethod
    def from_array(cls, v: Sequence[float]) -> "BlochVector":
        x, y, z = (float(c) for c in v)
        return cls(x, y, z)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def dot(self, other: "BlochVector") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def __neg__(self) -> "BlochVector":
        return BlochVector(-self.x, -self.y, -self.z)


X_AXIS = BlochVector(1.0, 0.0, 0.0)
Y_AXIS = BlochVector(0.0, 1.0, 0.0)
Z_AXIS = BlochVector(0.0, 0.0, 1.0)


@dataclass(frozen=True)
class Triad:
    """Three mutually orthogonal measurement directions of one party."""

    v1: BlochVector
    v2: BlochVector
    v3: BlochVector

    def __post_init__(self) -> None:
        vs = (self.v1, self.v2, self.v3)
        for i in range(3):
            for j in range(i + 1, 3):
                d = vs[i].dot(vs[j])
                if abs(d) > GEOMETRY_TOL:
                    raise InvalidInputError(f"triad vectors {i + 1} and {j + 1} have dot product {d!r}")

    @classmethod
    def from_matrix(cls, R: np.ndarray) -> "Triad":
        """Build a triad from the columns of a 3x3 matrix."""
        R = np.asarray(R, dtype=float)
        return cls(*(BlochVector.from_array(R[:, k]) for k in range(3)))

    @property
    def vectors(self) -> tuple[BlochVector, BlochVector, BlochVector]:
        return (self.v1, self.v2, self.v3)

    @property
    def matrix(self) -> np.ndarray:
        """3x3 array whose columns are the triad vectors."""
        return np.column_stack([v.array for v in self.vectors])

    def __iter__(self):
        return iter(self.vectors)

    def __len__(self) -> int:
        return 3

    def __getitem__(self, i: int) -> BlochVector:
        return self.vectors[i]


STANDARD_TRIAD = Triad(X_AXIS, Y_AXIS, Z_AXIS)


@dataclass(frozen=True)
class WernerState:
    """Singlet mixed with white noise; ``visibility`` scales every correlator."""

    visibility: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.visibility <= 1.0:
            raise InvalidInputError(f"visibility must lie in [0, 1], got {self.visibility!r}")


@dataclass(frozen=True)
class PhaseShifterCal:
    """Quadratic phase-voltage law of one thermal phase shifter, ``phi = alpha + beta v^2``."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise InvalidInputError(f"beta must be positive, got {self.beta!r}")
        object.__setattr__(self, "alpha", wrap_angle(self.alpha))


@dataclass(frozen=True)
class MzSettings:
    """Phases of the two shifters in one Mach-Zehnder interferometer."""

    phi1: float
    phi2: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi1", wrap_angle(self.phi1))
        object.__setattr__(self, "phi2", wrap_angle(self.phi2))


def correlator(a: BlochVector, b: BlochVector, state: WernerState) -> float:
    """Expectation of the outcome product, ``-V a.b``."""
    return -state.visibility * a.dot(b)


def _as_directions(vs) -> np.ndarray:
    if isinstance(vs, np.ndarray):
        arr = np.asarray(vs, dtype=float)
    else:
        arr = np.array([[v.x, v.y, v.z] if isinstance(v, BlochVector) else list(v) for v in vs], dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidInputError(f"expected a sequence of 3-vectors, got shape {arr.shape}")
    return arr


def correlator_tensor(A: np.ndarray, B: np.ndarray, visibility: float) -> np.ndarray:
    """Batched correlator matrices.

    ``A`` has shape ``(..., mA, 3)`` and ``B`` shape ``(..., mB, 3)``; the
    result has shape ``(..., mA, mB)``. Written out term by term so every
    entry equals :func:`correlator` bit for bit, whatever the batch size.
    """
    a = A[..., :, None, :]
    b = B[..., None, :, :]
    dot = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]
    return -visibility * dot


def correlator_matrix(A, B, state: WernerState) -> np.ndarray:
    """Matrix of correlators ``E[x, y]`` for Alice's settings ``A`` and Bob's ``B``."""
    if len(A) == 0 or len(B) == 0:
        raise InvalidInputError("both parties need at least one measurement setting")
    return correlator_tensor(_as_directions(A), _as_directions(B), state.visibility)


def joint_probability(a: BlochVector, b: BlochVector, state: WernerState, oA: int, oB: int) -> float:
    """Born-rule probability of outcomes ``(oA, oB)``; Werner marginals are uniform."""
    if oA not in (1, -1) or oB not in (1, -1):
        raise InvalidInputError(f"outcomes must be +1 or -1, got ({oA!r}, {oB!r})")
    return (1.0 + oA * oB * correlator(a, b, state)) / 4.0


def phase_from_voltage(v: float, cal: PhaseShifterCal) -> float:
    if v < 0:
        raise InvalidInputError(f"heater voltage must be non-negative, got {v!r}")
    return wrap_angle(cal.alpha + cal.beta * v * v)


def mz_bloch_array(phi1, phi2) -> np.ndarray:
    """Vectorised measurement direction for arrays of phases; last axis is (x, y, z).

    Conjugating sigma_Z by ``U = R_Y(phi2) R_Z(phi1)`` gives
    ``U^dag sigma_Z U = sigma . (-sin phi2 cos phi1, sin phi2 sin phi1, cos phi2)``.
    """
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    s2 = np.sin(phi2)
    return np.stack([-s2 * np.cos(phi1), s2 * np.sin(phi1), np.cos(phi2)], axis=-1)


def mz_measurement_vector(s: MzSettings) -> BlochVector:
    """Bloch vector measured by the interferometer followed by Z-basis detection."""
    return BlochVector.from_array(mz_bloch_array(s.phi1, s.phi2))


def _rz(phi: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * phi), 0], [0, np.exp(0.5j * phi)]])


def _ry(phi: float) -> np.ndarray:
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def mz_unitary_oracle(s: MzSettings) -> np.ndarray:
    """Explicit 2x2 unitary ``R_Y(phi2) R_Z(phi1)``, with ``R(phi) = exp(-i phi sigma / 2)``."""
    return _ry(s.phi2) @ _rz(s.phi1)


def bloch_from_observable(O: np.ndarray) -> np.ndarray:
    """Coefficients ``n`` of a traceless observable ``O = sigma . n``."""
    return np.real([np.trace(O @ P) / 2 for P in (_SIGMA_X, _SIGMA_Y, _SIGMA_Z)])


def oracle_measurement_vector(s: MzSettings) -> np.ndarray:
    """Measurement direction obtained by literal conjugation ``U^dag sigma_Z U``."""
    U = mz_unitary_oracle(s)
    return bloch_from_observable(U.conj().T @ _SIGMA_Z @ U)
