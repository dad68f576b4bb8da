"""Direct block-Toeplitz solver by a bordering (Rybicki-type) recursion.

The scalar algorithm solves a Toeplitz system by growing the solved
leading subsystem one row per step, maintaining generator sequences that
propagate the update.  Here every coefficient is an invertible dense
block, so products no longer commute and the generator updates must keep
their factors in matrix order.  With x, G, H the solution and generator
blocks at stage M, the step to stage M+1 reads

    x_{M+1} = D1^-1 (sum_j R_{M+1-j} x_j - y_{M+1})
    x_j    -= G_{M+1-j} x_{M+1}
    G_{M+1} = D2^-1 (sum_j R_{j-M-1} G_j - R_{-M-1})
    H_{M+1} = D1^-1 (sum_j R_{M+1-j} H_j - R_{M+1})
    G_j    -= H_{M+1-j} G_{M+1},   H_j -= G_{M+1-j} H_{M+1}

with denominators D1 = sum_i R_i G_i - R_0 and D2 = sum_i R_{-i} H_i - R_0
(all sums over the current stage, updates using stage-M values).  Each
denominator is LU-factored once per step; D1 serves both the solution
and the H update.  The base stage is x_1 = R_0^-1 y_1, G_1 = R_0^-1 R_{-1},
H_1 = R_0^-1 R_1.

No tolerance and no preconditioner are involved: for fixed inputs the
output is bitwise deterministic.  The recursion requires every
denominator to be invertible and aborts with a diagnostic otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numerics
from ..errors import ShapeError, SingularBlock, SingularDenominator, SingularMatrix
from ..toeplitz import BlockGenerator2L, assemble_dense_1l

__all__ = ["RybickiWorkspace", "rybicki_solve", "assemble_level1"]


@dataclass
class RybickiWorkspace:
    """Solution and generator blocks after a recursion stage."""

    x: np.ndarray  # (M, side, W)
    g: np.ndarray  # (M, side, side)
    h: np.ndarray  # (M, side, side)

    @property
    def stage(self) -> int:
        return self.x.shape[0]


def assemble_level1(gen: BlockGenerator2L) -> np.ndarray:
    """Assemble the level-1 matrices of a 2-level generator.

    Returns (2*n2-1, n1*n0, n1*n0) dense blocks in circulant order; the
    result generates the same matrix viewed as 1-level block-Toeplitz
    with side n1*n0 and stores (2*n2-1)*n1^2*n0^2 scalars.
    """
    return np.stack([assemble_dense_1l(col) for col in gen.columns])


def rybicki_solve(blocks: np.ndarray, y, step_hook=None) -> np.ndarray:
    """Solve the block-Toeplitz system generated by ``blocks``.

    ``blocks`` holds the 2*N-1 square coefficient blocks in circulant
    order (index n % (2N-1) is the block for signed offset n), so that
    block (i, j) of the system matrix is ``blocks[(i - j) % (2N - 1)]``.
    ``y`` is the stacked right-hand side with any number of columns.

    ``step_hook(stage, workspace)`` is invoked after every stage with a
    view of the current blocks (used by invariant tests).
    """
    blocks = np.asarray(blocks, dtype=np.complex128)
    if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
        raise ShapeError(f"blocks must be (2N-1, side, side), got {blocks.shape}")
    if blocks.shape[0] % 2 == 0:
        raise ShapeError(f"expected an odd number of blocks, got {blocks.shape[0]}")
    n = (blocks.shape[0] + 1) // 2
    side = blocks.shape[1]

    rhs = np.asarray(y, dtype=np.complex128)
    vector = rhs.ndim == 1
    if vector:
        rhs = rhs[:, None]
    if rhs.shape[0] != n * side:
        raise ShapeError(f"rhs rows {rhs.shape[0]} != N*side = {n * side}")
    w = rhs.shape[1]
    yb = rhs.reshape(n, side, w)

    def rb(offset: int) -> np.ndarray:
        return blocks[offset % (2 * n - 1)]

    try:
        lu0 = numerics.lu_factor(rb(0))
    except SingularMatrix as exc:
        raise SingularBlock("self block R_0 is singular") from exc

    x = np.empty((n, side, w), dtype=np.complex128)
    g = np.empty((max(n - 1, 0), side, side), dtype=np.complex128)
    h = np.empty_like(g)

    x[0] = numerics.lu_solve(lu0, yb[0])
    if n > 1:
        g[0] = numerics.lu_solve(lu0, rb(-1))
        h[0] = numerics.lu_solve(lu0, rb(1))
    if step_hook is not None:
        step_hook(1, RybickiWorkspace(x[:1], g[: min(1, n - 1)], h[: min(1, n - 1)]))

    for m in range(1, n):
        pos = blocks[1 : m + 1]          # R_1 .. R_m
        neg = blocks[2 * n - 1 - m :][::-1]  # R_-1 .. R_-m

        d1 = np.einsum("kij,kjl->il", pos, g[:m]) - rb(0)
        try:
            lu1 = numerics.lu_factor(d1)
        except SingularMatrix as exc:
            raise SingularDenominator(m) from exc

        num_x = np.einsum("kij,kjl->il", pos[::-1], x[:m]) - yb[m]
        x[m] = numerics.lu_solve(lu1, num_x)
        x[:m] -= g[:m][::-1] @ x[m]

        if m < n - 1:
            d2 = np.einsum("kij,kjl->il", neg, h[:m]) - rb(0)
            try:
                lu2 = numerics.lu_factor(d2)
            except SingularMatrix as exc:
                raise SingularDenominator(m) from exc
            g_new = numerics.lu_solve(lu2, np.einsum("kij,kjl->il", neg[::-1], g[:m]) - rb(-(m + 1)))
            h_new = numerics.lu_solve(lu1, np.einsum("kij,kjl->il", pos[::-1], h[:m]) - rb(m + 1))
            g_upd = g[:m] - h[:m][::-1] @ g_new
            h_upd = h[:m] - g[:m][::-1] @ h_new
            g[:m] = g_upd
            g[m] = g_new
            h[:m] = h_upd
            h[m] = h_new

        if step_hook is not None:
            stage = m + 1
            step_hook(stage, RybickiWorkspace(x[:stage], g[: min(stage, n - 1)], h[: min(stage, n - 1)]))

    out = x.reshape(n * side, w)
    return out[:, 0] if vector else out
