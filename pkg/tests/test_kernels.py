"""Compiled and numpy kernels against independent references."""
import numpy as np
import pytest

from randbell import _fallback
from randbell.chsh import naive_chsh_max

from conftest import KERNELS


def numpy_philox_block(k0, k1, counter):
    """Raw block via numpy's Philox, which pre-increments its counter."""
    bg = np.random.Philox(key=k0 | (k1 << 64), counter=(counter - 1) % (1 << 256))
    return [int(v) for v in bg.random_raw(4)]


@pytest.mark.parametrize("k0,k1,ctr", [
    (0, 0, (1, 0, 0, 0)),
    (5, 7, (1, 0, 3, 0)),
    (2**64 - 1, 2**63 + 5, (2**64 - 1, 17, 2**40, 9)),
])
def test_philox_matches_numpy(kernels, k0, k1, ctr):
    counter = ctr[0] | ctr[1] << 64 | ctr[2] << 128 | ctr[3] << 192
    assert kernels.philox_raw(k0, k1, *ctr) == numpy_philox_block(k0, k1, counter)


def test_uniform_block_matches_generator_random(kernels):
    u = kernels.uniform_block(99, 2**64 - 2, 4, 5, 11)
    for i in range(4):
        stream = (2**64 - 2 + i) % 2**64
        g = np.random.Generator(np.random.Philox(key=99 | stream << 64, counter=5 << 128))
        assert np.array_equal(u[i], g.random(11))


def test_uniform_block_empty(kernels):
    assert kernels.uniform_block(1, 0, 0, 0, 4).shape == (0, 4)
    assert kernels.uniform_block(1, 0, 3, 0, 0).shape == (3, 0)


@pytest.mark.parametrize("shape", [(2, 2), (3, 3), (2, 5), (5, 5), (8, 8)])
def test_chsh_batch_matches_naive(kernels, rng, shape):
    E = rng.uniform(-1, 1, (50,) + shape)
    values, witness = kernels.chsh_max_batch(np.ascontiguousarray(E))
    for i in range(len(E)):
        v, key = naive_chsh_max(E[i])
        assert values[i] == v
        assert tuple(witness[i]) == key


def test_chsh_ties_take_first_witness(kernels):
    values, witness = kernels.chsh_max_batch(-np.eye(3)[None].copy())
    assert values[0] == 2.0
    # terms (-1, 0, 0, -1): the minus on term 0 gives 0, on term 1 gives 2
    assert tuple(witness[0]) == (0, 1, 0, 1, 1)


@pytest.mark.skipif(len(KERNELS) < 2, reason="compiled kernels not built")
def test_backends_bit_identical(rng):
    compiled = KERNELS[1]
    E = rng.normal(size=(3000, 4, 6)) / 3
    v1, w1 = compiled.chsh_max_batch(E)
    v2, w2 = _fallback.chsh_max_batch(E)
    assert np.array_equal(v1, v2) and np.array_equal(w1, w2)
    assert np.array_equal(compiled.uniform_block(7, 0, 1000, 3, 10), _fallback.uniform_block(7, 0, 1000, 3, 10))
