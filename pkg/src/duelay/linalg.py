"""Dense SPD kernel: ridge-seeded design matrices with maintained inverse.

Supplies exactly what the bandit policies need: rank-one updates, weighted
norms under the matrix or its inverse, and a running log-determinant.  The
inverse is kept current via the Sherman-Morrison identity and recomputed
from scratch by Cholesky every ``REINVERT_EVERY`` updates to bound drift.

Internally only the upper triangle of each matrix is authoritative; all hot
operations go through symmetric BLAS (dsymv/dsyr/dsymm), which matters at
the parameter dimensions the neural policy uses (p in the thousands).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import blas, cho_factor, cho_solve


class InfoMatrix:
    """Symmetric positive definite matrix ``ridge*I + sum_i c_i v_i v_i^T``.

    Maintains the matrix, its inverse and ``log det`` under nonnegative
    rank-one updates.  All entries are float64; mutation only through
    :meth:`rank_one_update`.
    """

    REINVERT_EVERY = 500

    def __init__(self, dim: int, ridge: float):
        if dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim}")
        if not ridge > 0:
            raise ValueError(f"ridge must be positive, got {ridge}")
        self.dim = int(dim)
        self.ridge = float(ridge)
        # Fortran order so BLAS updates run in place without copies.
        self._mat = np.zeros((dim, dim), order="F")
        np.fill_diagonal(self._mat, ridge)
        self._inv = np.zeros((dim, dim), order="F")
        np.fill_diagonal(self._inv, 1.0 / ridge)
        self.logdet0 = dim * np.log(ridge)
        self.logdet = self.logdet0
        self.updates = 0

    # -- views ---------------------------------------------------------

    @property
    def mat(self) -> np.ndarray:
        """Full symmetric matrix (copy)."""
        return _symmetrize_upper(self._mat)

    @property
    def inv(self) -> np.ndarray:
        """Full symmetric inverse (copy)."""
        return _symmetrize_upper(self._inv)

    # -- operations ------------------------------------------------------

    def rank_one_update(self, v: np.ndarray, scale: float = 1.0) -> None:
        """Add ``scale * v v^T``; update inverse and logdet accordingly."""
        v = self._check_vec(v)
        if scale < 0:
            raise ValueError(f"scale must be nonnegative, got {scale}")
        w = blas.dsymv(1.0, self._inv, v, lower=0)  # V^{-1} v
        denom = 1.0 + scale * float(v @ w)
        # Impossible for scale >= 0 on an SPD matrix; guards silent corruption.
        if denom <= 1e-12:
            raise FloatingPointError(
                f"rank-one update would destroy positive definiteness (1 + s v'Minv v = {denom:.3e})"
            )
        self._mat = blas.dsyr(scale, v, a=self._mat, lower=0, overwrite_a=1)
        self._inv = blas.dsyr(-scale / denom, w, a=self._inv, lower=0, overwrite_a=1)
        self.logdet += np.log1p(scale * float(v @ w))
        self.updates += 1
        if self.updates % self.REINVERT_EVERY == 0:
            self._reinvert()

    def weighted_norm(self, v: np.ndarray, use_inverse: bool = False) -> float:
        """``sqrt(v^T M v)`` with M the matrix or its inverse."""
        v = self._check_vec(v)
        a = self._inv if use_inverse else self._mat
        q = float(v @ blas.dsymv(1.0, a, v, lower=0))
        return np.sqrt(max(q, 0.0))

    def weighted_norms(self, rows: np.ndarray, use_inverse: bool = True) -> np.ndarray:
        """Row-wise ``sqrt(v^T M v)`` for a stack of vectors, shape (n, dim)."""
        rows = np.ascontiguousarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.dim:
            raise ValueError(f"expected shape (n, {self.dim}), got {rows.shape}")
        a = self._inv if use_inverse else self._mat
        q = blas.dsymm(1.0, a, rows.T, side=0, lower=0)  # M @ rows^T
        vals = np.einsum("np,pn->n", rows, q)
        return np.sqrt(np.maximum(vals, 0.0))

    def identity_drift(self) -> float:
        """Frobenius deviation of ``inv @ mat`` from the identity (on demand)."""
        return float(np.linalg.norm(self.inv @ self.mat - np.eye(self.dim)))

    # -- internals -----------------------------------------------------

    def _reinvert(self) -> None:
        full = _symmetrize_upper(self._mat)
        c, low = cho_factor(full, lower=False)
        self._inv = np.asfortranarray(cho_solve((c, low), np.eye(self.dim)))
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
        self._mat = np.asfortranarray(full)

    def _check_vec(self, v: np.ndarray) -> np.ndarray:
        v = np.ascontiguousarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got shape {v.shape}")
        return v


def _symmetrize_upper(a: np.ndarray) -> np.ndarray:
    u = np.triu(a)
    return u + np.triu(a, 1).T
