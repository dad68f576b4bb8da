"""Two-level block-Toeplitz generators and the FFT-accelerated matvec.

A two-level block-Toeplitz matrix is constant along block diagonals on
both levels: level-2 blocks are themselves block-Toeplitz and level-0
blocks are unstructured ``n0 x n0`` matrices.  Such a matrix is fully
determined by its *generator*: the unique blocks arranged in circulant
order ``[0, +1, ..., +(N-1), -(N-1), ..., -1]`` on each level.

Embedding the matrix in a block circulant of size ``2N-1`` per level
block-diagonalizes it under the block-wise multilevel DFT

    F = F_{2*n2-1} (x) F_{2*n1-1} (x) I_{n0}

which turns a matvec into: zero-pad, forward transform, one small dense
multiply per transformed block row, inverse transform, extract.  Storage
is ``(2*n2-1)*(2*n1-1)*n0**2`` scalars instead of ``(n2*n1*n0)**2`` and
the matvec costs ``O(n0**2*n2*n1 + n0*n1*n2*(log n1 + log n2))`` per
column.

The block-wise transforms are realized as batched strided FFTs: the rows
of each residue class modulo the block side are transformed together,
one 1-D FFT pass per level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import BlockShapeMismatch, MissingOffset, ShapeError

__all__ = [
    "BlockGenerator1L",
    "BlockGenerator2L",
    "SpectralOperator",
    "PaddedVector",
    "circulant_offsets",
    "embed_1l",
    "embed_2l",
    "block_fft_1l",
    "block_fft_2l",
    "precompute_spectral",
    "pad_rhs",
    "extract_result",
    "matvec",
    "matvec_transpose",
    "assemble_dense_1l",
    "assemble_dense",
]

# A padded vector is an ordinary (rows, cols) complex array whose layout
# interleaves payload segments with circulant scratch; only the pad/extract
# helpers know which rows carry data.
PaddedVector = np.ndarray


def circulant_offsets(n: int) -> np.ndarray:
    """Signed offsets in circulant order: [0, 1, ..., n-1, -(n-1), ..., -1]."""
    return np.concatenate([np.arange(n), np.arange(-(n - 1), 0)])


@dataclass(frozen=True)
class BlockGenerator1L:
    """Generator of a 1-level block-Toeplitz matrix.

    ``column[i]`` is the ``n0 x n0`` block for signed offset
    ``circulant_offsets(n1)[i]``; offset ``i - j`` is the block at block
    position (i, j) of the assembled matrix.
    """

    n1: int
    n0: int
    column: np.ndarray  # (2*n1 - 1, n0, n0), circulant order

    def __post_init__(self):
        expected = (2 * self.n1 - 1, self.n0, self.n0)
        if self.column.shape != expected:
            raise BlockShapeMismatch(f"column shape {self.column.shape} != {expected}")

    def block(self, offset: int) -> np.ndarray:
        if not -self.n1 < offset < self.n1:
            raise MissingOffset(f"offset {offset} outside +-{self.n1 - 1}")
        return self.column[offset % (2 * self.n1 - 1)]

    @property
    def stored_scalars(self) -> int:
        return (2 * self.n1 - 1) * self.n0 * self.n0


@dataclass(frozen=True)
class BlockGenerator2L:
    """Generator of a 2-level block-Toeplitz matrix.

    ``columns`` holds one level-1 generator per signed level-2 offset, in
    circulant order; all share the same (n1, n0).
    """

    n2: int
    n1: int
    n0: int
    columns: tuple[BlockGenerator1L, ...]

    def __post_init__(self):
        if len(self.columns) != 2 * self.n2 - 1:
            raise BlockShapeMismatch(
                f"expected {2 * self.n2 - 1} level-1 generators, got {len(self.columns)}"
            )
        for col in self.columns:
            if (col.n1, col.n0) != (self.n1, self.n0):
                raise BlockShapeMismatch("level-1 generators disagree on (n1, n0)")

    def column(self, offset: int) -> BlockGenerator1L:
        if not -self.n2 < offset < self.n2:
            raise MissingOffset(f"offset {offset} outside +-{self.n2 - 1}")
        return self.columns[offset % (2 * self.n2 - 1)]

    def block(self, offset2: int, offset1: int) -> np.ndarray:
        return self.column(offset2).block(offset1)

    @property
    def dim(self) -> int:
        return self.n2 * self.n1 * self.n0

    @property
    def stored_scalars(self) -> int:
        return (2 * self.n2 - 1) * (2 * self.n1 - 1) * self.n0 * self.n0

    def stacked4(self) -> np.ndarray:
        """All blocks as one (2*n2-1, 2*n1-1, n0, n0) array, circulant order."""
        return np.stack([col.column for col in self.columns])


@dataclass(frozen=True)
class SpectralOperator:
    """Transformed generator: one dense n0 x n0 block per circulant grid point.

    ``diag_blocks[i]`` is block row ``i`` of the forward multilevel DFT of
    the stacked generator column; the embedded circulant acts on a
    transformed vector as the block-diagonal matrix of these blocks.
    """

    n2: int
    n1: int
    n0: int
    diag_blocks: np.ndarray  # ((2*n2-1)*(2*n1-1), n0, n0)

    @property
    def dim(self) -> int:
        return self.n2 * self.n1 * self.n0

    @property
    def stored_scalars(self) -> int:
        return self.diag_blocks.size


def _as_columns(data) -> tuple[np.ndarray, bool]:
    """Promote 1-D input to a single column; report whether it was 1-D."""
    arr = np.asarray(data, dtype=np.complex128)
    if arr.ndim == 1:
        return arr[:, None], True
    if arr.ndim != 2:
        raise ShapeError(f"expected a vector or column block, got ndim={arr.ndim}")
    return arr, False


def embed_1l(blocks: Mapping[int, np.ndarray], n1: int, n0: int) -> BlockGenerator1L:
    """Build a 1-level generator from a map of signed offsets to blocks.

    The offsets must cover exactly -(n1-1)..(n1-1).  The first column of
    the circulant embedding is formed by appending the reversed
    upper-triangular offsets after the lower ones:
    [R_0, R_1, ..., R_{n1-1}, R_{-n1+1}, ..., R_{-1}].
    """
    if n1 < 1 or n0 < 1:
        raise ShapeError("n1 and n0 must be positive")
    expected = set(range(-(n1 - 1), n1))
    got = set(blocks)
    if got != expected:
        missing = sorted(expected - got)
        stray = sorted(got - expected)
        raise MissingOffset(f"offset set mismatch: missing {missing}, stray {stray}")
    column = np.empty((2 * n1 - 1, n0, n0), dtype=np.complex128)
    for off, blk in blocks.items():
        arr = np.asarray(blk, dtype=np.complex128)
        if arr.shape != (n0, n0):
            raise BlockShapeMismatch(f"block at offset {off} has shape {arr.shape}, want {(n0, n0)}")
        column[off % (2 * n1 - 1)] = arr
    return BlockGenerator1L(n1, n0, column)


def embed_2l(
    blocks: Mapping[tuple[int, int], np.ndarray], n2: int, n1: int, n0: int
) -> BlockGenerator2L:
    """Build a 2-level generator from a map of (offset2, offset1) to blocks."""
    cols = []
    for off2 in circulant_offsets(n2):
        level1 = {o1: b for (o2, o1), b in blocks.items() if o2 == off2}
        cols.append(embed_1l(level1, n1, n0))
    stray = {o2 for o2, _ in blocks} - set(circulant_offsets(n2).tolist())
    if stray:
        raise MissingOffset(f"stray level-2 offsets {sorted(stray)}")
    return BlockGenerator2L(n2, n1, n0, tuple(cols))


def _fft_axis(arr: np.ndarray, axis: int, direction: str) -> np.ndarray:
    if direction == "forward":
        return np.fft.fft(arr, axis=axis)
    if direction == "inverse":
        return np.fft.ifft(arr, axis=axis)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def block_fft_1l(data, n0: int, direction: str = "forward") -> PaddedVector:
    """Block-wise DFT: independent length-(rows/n0) FFTs per row class mod n0.

    Realizes F_L (x) I_{n0} (or its normalized inverse) on each column.
    All residue classes and columns are transformed in one batched pass.
    """
    arr, vector = _as_columns(data)
    rows = arr.shape[0]
    if n0 < 1 or rows % n0:
        raise ShapeError(f"rows {rows} not divisible by block side {n0}")
    out = _fft_axis(arr.reshape(rows // n0, n0, -1), 0, direction).reshape(arr.shape)
    return out[:, 0] if vector else out


def block_fft_2l(data, n2: int, n1: int, n0: int, direction: str = "forward") -> PaddedVector:
    """Two-level block-wise DFT realizing F_{n2} (x) F_{n1} (x) I_{n0}.

    First, within each of the n2 level-2 segments, length-n1 FFTs run over
    the stride-n0 row classes; then length-n2 FFTs run over the
    stride-(n1*n0) classes.  The matvec calls this with the circulant
    sizes 2*n2-1 and 2*n1-1.
    """
    arr, vector = _as_columns(data)
    rows = arr.shape[0]
    if min(n2, n1, n0) < 1 or rows != n2 * n1 * n0:
        raise ShapeError(f"rows {rows} != n2*n1*n0 = {n2 * n1 * n0}")
    work = arr.reshape(n2, n1, n0, -1)
    work = _fft_axis(work, 1, direction)
    work = _fft_axis(work, 0, direction)
    out = work.reshape(arr.shape)
    return out[:, 0] if vector else out


def precompute_spectral(gen: BlockGenerator2L) -> SpectralOperator:
    """Forward-transform the stacked generator column into diagonal blocks."""
    k2, k1 = 2 * gen.n2 - 1, 2 * gen.n1 - 1
    stacked = gen.stacked4().reshape(k2 * k1 * gen.n0, gen.n0)
    transformed = block_fft_2l(stacked, k2, k1, gen.n0, "forward")
    return SpectralOperator(gen.n2, gen.n1, gen.n0, transformed.reshape(k2 * k1, gen.n0, gen.n0))


def pad_rhs(u, n2: int, n1: int, n0: int) -> PaddedVector:
    """Zero-pad a stacked vector to the circulant grid, level by level.

    Each of the n2 level-2 segments (n1*n0 rows) is followed by
    (n1-1)*n0 zero rows, and (n2-1)*(2*n1-1)*n0 zero rows trail the
    whole vector.  For n2 = 1 this degenerates to [u; 0].
    """
    arr, vector = _as_columns(u)
    if arr.shape[0] != n2 * n1 * n0:
        raise ShapeError(f"rows {arr.shape[0]} != n2*n1*n0 = {n2 * n1 * n0}")
    w = arr.shape[1]
    out = np.zeros(((2 * n2 - 1) * (2 * n1 - 1) * n0, w), dtype=np.complex128)
    out.reshape(2 * n2 - 1, 2 * n1 - 1, n0, w)[:n2, :n1] = arr.reshape(n2, n1, n0, w)
    return out[:, 0] if vector else out


def extract_result(v, n2: int, n1: int, n0: int) -> np.ndarray:
    """Collect the payload rows of a circulant-length vector, dropping scratch.

    Segment n lives at rows n*(2*n1-1)*n0 .. n*(2*n1-1)*n0 + n1*n0 - 1.
    """
    arr, vector = _as_columns(v)
    if arr.shape[0] != (2 * n2 - 1) * (2 * n1 - 1) * n0:
        raise ShapeError(
            f"rows {arr.shape[0]} != circulant length {(2 * n2 - 1) * (2 * n1 - 1) * n0}"
        )
    w = arr.shape[1]
    out = arr.reshape(2 * n2 - 1, 2 * n1 - 1, n0, w)[:n2, :n1].reshape(n2 * n1 * n0, w)
    return out[:, 0] if vector else out


def matvec(op: SpectralOperator, u) -> np.ndarray:
    """Apply the represented block-Toeplitz matrix to one or more columns.

    pad -> forward transform -> per-block multiply by ``diag_blocks`` ->
    inverse transform -> extract.  Columns are batched through every
    stage.
    """
    arr, vector = _as_columns(u)
    if arr.shape[0] != op.dim:
        raise ShapeError(f"rows {arr.shape[0]} != operator dim {op.dim}")
    k2, k1 = 2 * op.n2 - 1, 2 * op.n1 - 1
    padded = pad_rhs(arr, op.n2, op.n1, op.n0)
    hat = block_fft_2l(padded, k2, k1, op.n0, "forward")
    prod = op.diag_blocks @ hat.reshape(k2 * k1, op.n0, -1)
    back = block_fft_2l(prod.reshape(k2 * k1 * op.n0, -1), k2, k1, op.n0, "inverse")
    out = extract_result(back, op.n2, op.n1, op.n0)
    return out[:, 0] if vector else out


def matvec_transpose(op: SpectralOperator, u) -> np.ndarray:
    """Apply the transpose of the represented matrix.

    The embedded circulant is F^-1 D F with symmetric DFT factors, so its
    transpose is F D^T F^-1; padding and extraction are transposes of each
    other because they address the same rows.  The transposed matvec is
    therefore the same pipeline with the transform directions swapped and
    each diagonal block transposed.
    """
    arr, vector = _as_columns(u)
    if arr.shape[0] != op.dim:
        raise ShapeError(f"rows {arr.shape[0]} != operator dim {op.dim}")
    k2, k1 = 2 * op.n2 - 1, 2 * op.n1 - 1
    padded = pad_rhs(arr, op.n2, op.n1, op.n0)
    hat = block_fft_2l(padded, k2, k1, op.n0, "inverse")
    prod = np.swapaxes(op.diag_blocks, 1, 2) @ hat.reshape(k2 * k1, op.n0, -1)
    back = block_fft_2l(prod.reshape(k2 * k1 * op.n0, -1), k2, k1, op.n0, "forward")
    out = extract_result(back, op.n2, op.n1, op.n0)
    return out[:, 0] if vector else out


def assemble_dense_1l(gen: BlockGenerator1L) -> np.ndarray:
    """Densely assemble a 1-level block-Toeplitz matrix (oracle-sized)."""
    idx = (np.arange(gen.n1)[:, None] - np.arange(gen.n1)[None, :]) % (2 * gen.n1 - 1)
    full = gen.column[idx]  # (n1, n1, n0, n0)
    return full.transpose(0, 2, 1, 3).reshape(gen.n1 * gen.n0, gen.n1 * gen.n0)


def assemble_dense(gen: BlockGenerator2L) -> np.ndarray:
    """Densely assemble the full 2-level matrix; the matvec oracle.

    Block (i, j) at level 2 is the level-1 matrix for offset i - j, and
    within it block (p, q) is the generator block for offsets
    (i - j, p - q).
    """
    blocks4 = gen.stacked4()
    idx2 = (np.arange(gen.n2)[:, None] - np.arange(gen.n2)[None, :]) % (2 * gen.n2 - 1)
    idx1 = (np.arange(gen.n1)[:, None] - np.arange(gen.n1)[None, :]) % (2 * gen.n1 - 1)
    full = blocks4[idx2[:, :, None, None], idx1[None, None, :, :]]  # (n2, n2, n1, n1, n0, n0)
    return full.transpose(0, 2, 4, 1, 3, 5).reshape(gen.dim, gen.dim)
