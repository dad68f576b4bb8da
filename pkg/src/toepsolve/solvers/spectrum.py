"""Randomized singular-value estimation of the preconditioned operator.

A randomized range finder with subspace (power) iterations samples the
dominant range of P^-1 Z using only the fast matvec and its adjoint;
the singular values of the projected sketch approximate the leading
singular values.  The adjoint (P^-1 Z)^H = Z^H P^-H is available because
both the bordered matvec and the blockwise preconditioner solve expose
conjugate-transpose actions.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .bordered import BorderedOperator, bordered_matvec, bordered_matvec_adjoint

__all__ = ["spectrum_estimate"]


def spectrum_estimate(
    op: BorderedOperator,
    p=None,
    count: int = 100,
    oversample: int = 10,
    power_iters: int = 2,
    seed: int = 0,
) -> np.ndarray:
    """Top ``count`` singular values of P^-1 Z, in non-increasing order."""
    n = op.dim
    if not 1 <= count <= n:
        raise ShapeError(f"count {count} outside 1..{n}")

    def forward(x):
        y = bordered_matvec(op, x)
        return y if p is None else p.apply(y)

    def adjoint(x):
        y = x if p is None else p.apply_adjoint(x)
        return bordered_matvec_adjoint(op, y)

    rng = np.random.default_rng(seed)
    samples = min(count + oversample, n)
    omega = (
        rng.standard_normal((n, samples)) + 1j * rng.standard_normal((n, samples))
    ) / np.sqrt(2.0)

    q, _ = np.linalg.qr(forward(omega))
    for _ in range(power_iters):
        q, _ = np.linalg.qr(adjoint(q))
        q, _ = np.linalg.qr(forward(q))

    sketch = adjoint(q).conj().T  # rows: Q^H (P^-1 Z)
    values = np.linalg.svd(sketch, compute_uv=False)
    return values[:count]
