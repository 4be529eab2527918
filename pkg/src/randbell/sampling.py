"""Reproducible randomness on top of the counter-based Philox4x64-10 generator.

Stream layout
-------------
Every draw is a pure function of ``(seed, stream_id, substream, position)``:

* the Philox key is ``(seed, stream_id)``; experiments use ``stream_id = trial index``;
* the substream occupies the third counter word, so each substream owns
  ``2**128`` blocks that never overlap another substream;
* block ``k`` (counting from 1) supplies uniforms ``4(k-1) .. 4k-1`` as
  ``(word >> 11) * 2**-53``.

This is exactly numpy's ``Philox(key=seed | stream_id << 64,
counter=substream << 128)`` consumed through ``Generator.random``, so a
single :class:`RngStream` and the batched :func:`uniform_block` agree bit for
bit.
"""
from __future__ import annotations

import math

import numpy as np

from randbell import _backend
from randbell.core import BlochVector, InvalidInputError, Triad

SETTINGS = 0
COUNTS = 1
RESAMPLING = 2
CALIBRATION = 3

_U64 = 1 << 64

# uniforms consumed per draw
UNIT_VECTOR_UNIFORMS = 2
ROTATION_UNIFORMS = 3


def _check_u64(name: str, value: int) -> int:
    value = int(value)
    if not 0 <= value < _U64:
        raise InvalidInputError(f"{name} must be an unsigned 64-bit integer, got {value}")
    return value


class RngStream:
    """One independent random stream, identified by ``(seed, stream_id, substream)``.

    Not thread-safe; give each worker its own stream.
    """

    def __init__(self, seed: int, stream_id: int = 0, substream: int = SETTINGS):
        self.seed = _check_u64("seed", seed)
        self.stream_id = _check_u64("stream_id", stream_id)
        self.substream = _check_u64("substream", substream)
        bitgen = np.random.Philox(key=self.seed | (self.stream_id << 64), counter=self.substream << 128)
        self.generator = np.random.Generator(bitgen)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, substream={self.substream})"

    def uniform(self, n: int | None = None):
        """Uniform doubles in ``[0, 1)``."""
        return self.generator.random(n)

    def poisson(self, lam):
        return self.generator.poisson(lam)


def uniform_block(seed: int, start: int, count: int, n: int, substream: int = SETTINGS) -> np.ndarray:
    """First ``n`` uniforms of streams ``start .. start+count-1``, shape ``(count, n)``.

    Row ``i`` equals ``RngStream(seed, start + i, substream).uniform(n)``.
    """
    seed = _check_u64("seed", seed)
    start = _check_u64("start", start)
    if count < 0 or n < 0:
        raise InvalidInputError("count and n must be non-negative")
    return _backend.uniform_block(seed, start, int(count), _check_u64("substream", substream), int(n))


# -- transforms from uniforms; shared by the scalar and batched paths --------

def unit_vectors_from_uniforms(u: np.ndarray) -> np.ndarray:
    """Map uniform pairs ``(..., 2)`` to points uniform on the sphere ``(..., 3)``.

    Archimedes: ``z`` uniform on ``[-1, 1]`` and azimuth uniform on ``[0, 2 pi)``.
    """
    z = 2.0 * u[..., 0] - 1.0
    phi = 2.0 * math.pi * u[..., 1]
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def quaternions_from_uniforms(u: np.ndarray) -> np.ndarray:
    """Shoemake's map from three uniforms to a uniform unit quaternion ``(w, x, y, z)``."""
    s1 = np.sqrt(1.0 - u[..., 0])
    s2 = np.sqrt(u[..., 0])
    t1 = 2.0 * math.pi * u[..., 1]
    t2 = 2.0 * math.pi * u[..., 2]
    return np.stack([s2 * np.cos(t2), s1 * np.sin(t1), s1 * np.cos(t1), s2 * np.sin(t2)], axis=-1)


def rotation_from_quaternion(q: np.ndarray) -> np.ndarray:
    """Rotation matrices ``(..., 3, 3)`` from unit quaternions ``(..., 4)``."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - z * w)
    R[..., 0, 2] = 2 * (x * z + y * w)
    R[..., 1, 0] = 2 * (x * y + z * w)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - x * w)
    R[..., 2, 0] = 2 * (x * z - y * w)
    R[..., 2, 1] = 2 * (y * z + x * w)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def rotations_from_uniforms(u: np.ndarray) -> np.ndarray:
    """Haar-random rotations; the triad vectors are the columns."""
    return rotation_from_quaternion(quaternions_from_uniforms(u))


# -- public samplers ---------------------------------------------------------

def random_unit_vector(rng: RngStream) -> BlochVector:
    return BlochVector.from_array(unit_vectors_from_uniforms(rng.uniform(UNIT_VECTOR_UNIFORMS)))


def random_triad(rng: RngStream) -> Triad:
    """Right-handed orthonormal triad, Haar distributed over rotations."""
    return Triad.from_matrix(rotations_from_uniforms(rng.uniform(ROTATION_UNIFORMS)))


def random_unbiased_pair(rng: RngStream) -> tuple[BlochVector, BlochVector]:
    """Two orthogonal directions: the first two columns of a Haar rotation."""
    R = rotations_from_uniforms(rng.uniform(ROTATION_UNIFORMS))
    return BlochVector.from_array(R[:, 0]), BlochVector.from_array(R[:, 1])


def random_voltages(rng: RngStream, count: int, vmax: float = 7.0) -> np.ndarray:
    """Independent heater voltages, uniform on ``[0, vmax]``."""
    if count < 1:
        raise InvalidInputError(f"count must be at least 1, got {count}")
    if not vmax > 0:
        raise InvalidInputError(f"vmax must be positive, got {vmax}")
    return vmax * rng.uniform(count)
