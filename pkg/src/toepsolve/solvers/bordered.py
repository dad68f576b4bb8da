"""Fast matvec for bordered systems [[Z_A, Z_B^T], [Z_B, Z_C]].

The structured part is applied through its spectral operator; the border
blocks are small and multiply densely.  Transpose and adjoint actions
are provided for the randomized spectrum estimator: the transpose of the
bordered matrix is again bordered, with the structured part transposed
and the same coupling block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..toeplitz import SpectralOperator, matvec, matvec_transpose, precompute_spectral

__all__ = ["BorderedOperator", "bordered_matvec", "bordered_matvec_transpose", "bordered_matvec_adjoint"]


@dataclass(frozen=True)
class BorderedOperator:
    """Matrix-free representation of a bordered block-Toeplitz matrix."""

    spectral: SpectralOperator
    zb: np.ndarray  # (nb, array_dim)
    zc: np.ndarray  # (nb, nb)

    def __post_init__(self):
        if self.zb.shape != (self.zc.shape[0], self.spectral.dim):
            raise ShapeError(
                f"border shapes {self.zb.shape}/{self.zc.shape} inconsistent with "
                f"array dim {self.spectral.dim}"
            )
        if self.zc.shape[0] != self.zc.shape[1]:
            raise ShapeError(f"border self block must be square, got {self.zc.shape}")

    @classmethod
    def from_system(cls, sys) -> "BorderedOperator":
        return cls(precompute_spectral(sys.gen), sys.zb, sys.zc)

    @property
    def array_dim(self) -> int:
        return self.spectral.dim

    @property
    def nb(self) -> int:
        return self.zb.shape[0]

    @property
    def dim(self) -> int:
        return self.array_dim + self.nb

    @property
    def generator_bytes(self) -> int:
        return self.spectral.n0**2 * (2 * self.spectral.n2 - 1) * (2 * self.spectral.n1 - 1) * 16


def _split(op: BorderedOperator, x) -> tuple[np.ndarray, np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.complex128)
    vector = arr.ndim == 1
    if vector:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != op.dim:
        raise ShapeError(f"input shape {np.shape(x)} incompatible with operator dim {op.dim}")
    return arr[: op.array_dim], arr[op.array_dim :], vector


def bordered_matvec(op: BorderedOperator, x) -> np.ndarray:
    """[Z_A x_A + Z_B^T x_C ; Z_B x_A + Z_C x_C] for one or more columns."""
    xa, xc, vector = _split(op, x)
    top = matvec(op.spectral, xa)
    bottom = op.zb @ xa + op.zc @ xc
    if op.nb:
        top = top + op.zb.T @ xc
    out = np.vstack([top, bottom])
    return out[:, 0] if vector else out


def bordered_matvec_transpose(op: BorderedOperator, x) -> np.ndarray:
    """Plain (non-conjugated) transpose action of the bordered matrix."""
    xa, xc, vector = _split(op, x)
    top = matvec_transpose(op.spectral, xa)
    bottom = op.zb @ xa + op.zc.T @ xc
    if op.nb:
        top = top + op.zb.T @ xc
    out = np.vstack([top, bottom])
    return out[:, 0] if vector else out


def bordered_matvec_adjoint(op: BorderedOperator, x) -> np.ndarray:
    """Conjugate-transpose action, via the transpose of the conjugate."""
    return np.conj(bordered_matvec_transpose(op, np.conj(x)))
