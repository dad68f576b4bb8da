"""Shared oracles and fixtures for the test suite.

All expected values are produced by independent brute-force routines
(naive DFT sums, triple-loop products, dense assembly + LAPACK) so the
fast paths are never checked against themselves.
"""

import numpy as np

from toepsolve.problems import ArrayProblemSpec
from toepsolve.toeplitz import BlockGenerator2L, embed_2l


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_generator(rng, n2, n1, n0, symmetric=False, diag_boost=0.0) -> BlockGenerator2L:
    """Random 2-level generator; optionally transpose-symmetric or diagonally boosted."""
    blocks = {}
    for o2 in range(-(n2 - 1), n2):
        for o1 in range(-(n1 - 1), n1):
            blocks[(o2, o1)] = random_complex(rng, n0, n0)
    if symmetric:
        blocks[(0, 0)] = blocks[(0, 0)] + blocks[(0, 0)].T
        for key in list(blocks):
            if key > (0, 0):
                blocks[(-key[0], -key[1])] = blocks[key].T.copy()
    if diag_boost:
        blocks[(0, 0)] = blocks[(0, 0)] + diag_boost * np.eye(n0)
    return embed_2l(blocks, n2, n1, n0)


def naive_dft(x, inverse=False):
    """O(n^2) reference DFT along the first axis."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[0]
    sign = 1 if inverse else -1
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    f = np.exp(sign * 2j * np.pi * j * k / n)
    out = np.tensordot(f, x, axes=(1, 0))
    return out / n if inverse else out


def dft_matrix(n, inverse=False):
    f = naive_dft(np.eye(n))
    return np.conj(f) / n if inverse else f


def naive_matmul(a, b):
    """Triple-loop product, the matmul oracle."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.complex128)
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0 + 0.0j
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def rel_err(got, want):
    got = np.asarray(got)
    want = np.asarray(want)
    denom = np.linalg.norm(want)
    if denom == 0.0:
        return float(np.linalg.norm(got))
    return float(np.linalg.norm(got - want) / denom)


def monotone_nonincreasing(history):
    return all(history[i + 1] <= history[i] for i in range(len(history) - 1))


def reference_spec_6x6(**overrides) -> ArrayProblemSpec:
    """The 6x6 reference problem used by convergence and spectrum tests."""
    params = dict(ny=6, nx=6, ne=8, seed=2024)
    params.update(overrides)
    return ArrayProblemSpec(**params)


def smooth_spec_2x2(**overrides) -> ArrayProblemSpec:
    """Small smooth-kernel problem whose singular values decay fast.

    Used by the randomized-SVD accuracy tests: the shift is tiny so the
    kernel dominates and the spectrum is far from flat.
    """
    params = dict(ny=2, nx=2, ne=3, diagonal_shift=1e-3, regularization=0.3, seed=11)
    params.update(overrides)
    return ArrayProblemSpec(**params)
