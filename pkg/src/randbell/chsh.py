"""CHSH expressions over correlator matrices.

Indices are zero-based. A witness ``(xa, xa2, yb, yb2, minus_pos)`` names the
expression

    | E[xa,yb] + E[xa,yb2] + E[xa2,yb] + E[xa2,yb2] |

with the sign of term ``minus_pos`` flipped, the terms being numbered in the
order written. Local models keep every such value at or below 2.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from randbell import _backend
from randbell.core import InvalidInputError, Triad

log = logging.getLogger(__name__)

TSIRELSON = 2.0 * math.sqrt(2.0)
LOCAL_BOUND = 2.0
ORTHOGONALITY_TOL = 1e-6
BOUND_EQUALITY_TOL = 1e-9


class PreconditionError(InvalidInputError):
    """Input matrix is not orthogonal up to a uniform scale."""


@dataclass(frozen=True)
class ChshWitness:
    xa: int
    xa2: int
    yb: int
    yb2: int
    minus_pos: int
    value: float

    def __post_init__(self) -> None:
        if self.xa == self.xa2 or self.yb == self.yb2:
            raise InvalidInputError("a CHSH witness needs two distinct settings per party")
        if self.minus_pos not in range(4):
            raise InvalidInputError(f"minus_pos must be 0..3, got {self.minus_pos}")

    @property
    def terms(self) -> tuple[tuple[int, int], ...]:
        return ((self.xa, self.yb), (self.xa, self.yb2), (self.xa2, self.yb), (self.xa2, self.yb2))

    @property
    def key(self) -> tuple[int, int, int, int, int]:
        return (self.xa, self.xa2, self.yb, self.yb2, self.minus_pos)


def chsh_value(E: np.ndarray, w: ChshWitness) -> float:
    """Absolute value of the CHSH expression selected by ``w`` (``w.value`` is ignored)."""
    E = np.asarray(E, dtype=float)
    ma, mb = E.shape
    if max(w.xa, w.xa2) >= ma or max(w.yb, w.yb2) >= mb or min(w.key[:4]) < 0:
        raise InvalidInputError(f"witness {w.key[:4]} out of bounds for a {ma}x{mb} matrix")
    a, b, c, d = (float(E[i, j]) for i, j in w.terms)
    signed = [((-a + b) + c) + d, ((a - b) + c) + d, ((a + b) - c) + d, ((a + b) + c) - d]
    return abs(signed[w.minus_pos])


def _check_settings(shape: tuple[int, ...]) -> None:
    if shape[-2] < 2 or shape[-1] < 2:
        raise InvalidInputError(f"CHSH needs at least 2 settings per party, got {shape[-2]}x{shape[-1]}")


def chsh_max_batch(E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximal CHSH value and witness index rows ``(n, 5)`` for a stack ``(n, mA, mB)``."""
    E = np.ascontiguousarray(E, dtype=np.float64)
    if E.ndim != 3:
        raise InvalidInputError(f"expected a stack of matrices, got shape {E.shape}")
    _check_settings(E.shape)
    return _backend.chsh_max_batch(E)


def chsh_max(E: np.ndarray) -> ChshWitness:
    """Exhaustive search over all row pairs, column pairs and minus positions.

    Ties go to the lexicographically smallest ``(xa, xa2, yb, yb2, minus_pos)``.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {E.shape}")
    values, wit = chsh_max_batch(E[None])
    return ChshWitness(*(int(i) for i in wit[0]), value=float(values[0]))


# -- the constructive proof for orthogonal 3x3 matrices -----------------------

@dataclass(frozen=True)
class CanonicalForm:
    """``matrix[i, j] == row_signs[i] * col_signs[j] * original[row_perm[i], col_perm[j]]``."""

    matrix: np.ndarray
    row_perm: tuple[int, int, int]
    col_perm: tuple[int, int, int]
    row_signs: tuple[int, int, int]
    col_signs: tuple[int, int, int]

    def restore(self) -> np.ndarray:
        """Undo the relabelling and return the original matrix."""
        out = np.empty((3, 3))
        rs, cs = np.array(self.row_signs), np.array(self.col_signs)
        out[np.ix_(self.row_perm, self.col_perm)] = self.matrix * rs[:, None] * cs[None, :]
        return out


def orthogonality_scale(E: np.ndarray, tol: float = ORTHOGONALITY_TOL) -> float:
    """Return ``c`` with ``E^T E = c I``, or raise :class:`PreconditionError`."""
    E = np.asarray(E, dtype=float)
    if E.shape != (3, 3):
        raise PreconditionError(f"expected a 3x3 matrix, got shape {E.shape}")
    G = E.T @ E
    c = float(np.trace(G)) / 3.0
    dev = float(np.max(np.abs(G - c * np.eye(3))))
    if not c > 0 or dev > tol:
        raise PreconditionError(f"E^T E deviates from c*I by {dev:.3g} (tolerance {tol:g}, c = {c:.6g})")
    return c


def canonicalize(E: np.ndarray) -> CanonicalForm:
    """Relabel settings and outcomes into the normal form used by the proof.

    Steps, in order:

    1. move the largest ``|E_ij|`` (first in row-major order on ties) to the
       bottom-right corner, keeping the other rows and columns in order;
    2. order the two remaining columns so that ``|E11 E22| >= |E12 E21|``;
    3. flip row signs so that ``E11, E22, E33 > 0``;
    4. if ``E12 > 0`` or ``E21 < 0``, negate row 2 and column 2.
    """
    E = np.asarray(E, dtype=float)
    orthogonality_scale(E)
    flat = int(np.argmax(np.abs(E)))
    i, j = divmod(flat, 3)
    rows = [r for r in range(3) if r != i] + [i]
    cols = [c for c in range(3) if c != j] + [j]
    M = E[np.ix_(rows, cols)]
    if abs(M[0, 0] * M[1, 1]) < abs(M[0, 1] * M[1, 0]):
        cols[0], cols[1] = cols[1], cols[0]
        M = E[np.ix_(rows, cols)]
    row_signs = [1 if M[k, k] > 0 else -1 for k in range(3)]
    col_signs = [1, 1, 1]
    M = M * np.array(row_signs)[:, None]
    if M[0, 1] > 0 or M[1, 0] < 0:
        row_signs[1] *= -1
        col_signs[1] *= -1
        M[1, :] *= -1
        M[:, 1] *= -1
    return CanonicalForm(M, tuple(rows), tuple(cols), tuple(row_signs), tuple(col_signs))


# canonical sign pattern of E11 + E21 - E12 + E22 on the leading 2x2 block
_PROOF_SIGNS = np.array([[1, -1], [1, 1]])


def proof_witness(E: np.ndarray) -> ChshWitness:
    """Witness ``E11 + E21 - E12 + E22`` of the canonical form, in original labels.

    For an orthogonal matrix its value is at least 2, with equality only for
    aligned triads.
    """
    E = np.asarray(E, dtype=float)
    c = orthogonality_scale(E)
    if abs(c - 1.0) > ORTHOGONALITY_TOL:
        raise PreconditionError(f"proof_witness needs an orthogonal matrix (scale 1), got scale {c:.6g}; rescale first")
    cf = canonicalize(E)
    # sign of each original entry in the expression, keyed by original (row, col)
    signs = {}
    for a in range(2):
        for b in range(2):
            r, col = cf.row_perm[a], cf.col_perm[b]
            signs[(r, col)] = int(_PROOF_SIGNS[a, b] * cf.row_signs[a] * cf.col_signs[b])
    xa, xa2 = sorted(cf.row_perm[:2])
    yb, yb2 = sorted(cf.col_perm[:2])
    pattern = [signs[t] for t in ((xa, yb), (xa, yb2), (xa2, yb), (xa2, yb2))]
    if pattern.count(-1) == 3:
        pattern = [-s for s in pattern]
    minus_pos = pattern.index(-1)
    w = ChshWitness(xa, xa2, yb, yb2, minus_pos, 0.0)
    return ChshWitness(xa, xa2, yb, yb2, minus_pos, chsh_value(E, w))


def compare_with_max(E: np.ndarray, gap_tol: float = BOUND_EQUALITY_TOL) -> tuple[ChshWitness, ChshWitness]:
    """Proof witness and exhaustive maximum; logs a warning when they differ by more than ``gap_tol``."""
    pw = proof_witness(E)
    best = chsh_max(E)
    if best.value - pw.value > gap_tol:
        log.warning("proof construction below the maximum by %.3g for E=%s", best.value - pw.value, np.array2string(np.asarray(E)))
    return pw, best


def is_aligned(A: Triad, B: Triad, tol: float = BOUND_EQUALITY_TOL) -> bool:
    """True iff every vector of ``A`` equals plus or minus some vector of ``B``."""
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    D = A.matrix.T @ B.matrix
    big = np.abs(np.abs(D) - 1.0) <= tol
    small = np.abs(D) <= tol
    if not np.all(big | small):
        return False
    return bool(np.all(big.sum(axis=0) == 1) and np.all(big.sum(axis=1) == 1))


def naive_chsh_max(E) -> tuple[float, tuple[int, int, int, int, int]]:
    """Plain-Python enumeration of every CHSH expression; an oracle for :func:`chsh_max`."""
    E = [[float(v) for v in row] for row in np.asarray(E)]
    best, arg = -1.0, None
    for x, x2 in itertools.combinations(range(len(E)), 2):
        for y, y2 in itertools.combinations(range(len(E[0])), 2):
            t = [E[x][y], E[x][y2], E[x2][y], E[x2][y2]]
            for k in range(4):
                v = abs(sum(-t[i] if i == k else t[i] for i in range(4)))
                if v > best:
                    best, arg = v, (x, x2, y, y2, k)
    return best, arg
