"""Fully connected ReLU network with mirrored initialization.

Contexts are fed in duplicated form ``(x, x)/sqrt(2)``; hidden layers start
block-diagonal ``[[A, 0], [0, A]]`` and the output layer starts ``[w, -w]``,
so the two halves of the network compute identical streams whose outputs
cancel: the initial network is exactly zero on every padded context.  That
zero-at-init property is what lets the gradient features at initialization
serve as a tangent-kernel basis for the bandit's uncertainty estimates.

All passes are batched numpy; gradients are exact reverse-mode with the ReLU
subgradient at 0 pinned to 0 for determinism.
"""

from __future__ import annotations

import numpy as np


def pad_context(x: np.ndarray) -> np.ndarray:
    """Duplicate-and-rescale a unit-norm context: ``(x, x)/sqrt(2)``."""
    x = np.asarray(x, dtype=np.float64)
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        raise ValueError("cannot pad the zero vector")
    if abs(nrm - 1.0) > 1e-6:
        raise ValueError(f"pad_context expects a unit-norm input, got |x| = {nrm:.6g}")
    return np.concatenate([x, x]) / np.sqrt(2.0)


def normalize_and_pad(X: np.ndarray) -> np.ndarray:
    """Renormalize rows to unit norm, then pad; rows of X must be nonzero."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    nrm = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(nrm == 0.0):
        raise ValueError("cannot pad zero rows")
    U = X / nrm
    return np.hstack([U, U]) / np.sqrt(2.0)


class SymmetricMlp:
    """ReLU MLP ``h(x) = W_L relu(W_{L-1} relu(... relu(W_1 x))))``.

    Parameters live in one flat float64 vector ``theta``; the per-layer weight
    matrices are views into it, so in-place updates of ``theta`` (or
    :meth:`set_theta`) keep everything consistent.
    """

    def __init__(self, d: int, m: int, depth: int, rng: np.random.Generator):
        if d % 2 or m % 2:
            raise ValueError(f"d and m must be even for the mirrored init, got d={d}, m={m}")
        if depth < 2:
            raise ValueError(f"depth must be >= 2, got {depth}")
        self.d = int(d)
        self.m = int(m)
        self.depth = int(depth)
        shapes = [(m, d)] + [(m, m)] * (depth - 2) + [(1, m)]
        sizes = [r * c for r, c in shapes]
        self.num_params = int(np.sum(sizes))
        self.theta = np.zeros(self.num_params)
        self.layer_slices: list[tuple[slice, tuple[int, int]]] = []
        off = 0
        for shp, sz in zip(shapes, sizes):
            self.layer_slices.append((slice(off, off + sz), shp))
            off += sz
        self._init_mirrored(rng)

    @classmethod
    def from_seed(cls, d: int, m: int, depth: int, seed: int) -> "SymmetricMlp":
        from .rng import substream

        return cls(d, m, depth, substream(seed, "init"))

    # -- parameters ------------------------------------------------------

    @property
    def weights(self) -> list[np.ndarray]:
        return [self.theta[sl].reshape(shp) for sl, shp in self.layer_slices]

    def get_theta(self) -> np.ndarray:
        return self.theta.copy()

    def set_theta(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got shape {theta.shape}")
        self.theta[:] = theta

    def clone(self) -> "SymmetricMlp":
        other = object.__new__(SymmetricMlp)
        other.d, other.m, other.depth = self.d, self.m, self.depth
        other.num_params = self.num_params
        other.layer_slices = list(self.layer_slices)
        other.theta = self.theta.copy()
        return other

    def _init_mirrored(self, rng: np.random.Generator) -> None:
        half_m, half_d = self.m // 2, self.d // 2
        ws = self.weights
        blk = rng.standard_normal((half_m, half_d)) * np.sqrt(4.0 / self.m)
        ws[0][:] = 0.0
        ws[0][:half_m, :half_d] = blk
        ws[0][half_m:, half_d:] = blk
        for w in ws[1:-1]:
            blk = rng.standard_normal((half_m, half_m)) * np.sqrt(4.0 / self.m)
            w[:] = 0.0
            w[:half_m, :half_m] = blk
            w[half_m:, half_m:] = blk
        out = rng.standard_normal(half_m) * np.sqrt(2.0 / self.m)
        ws[-1][0, :half_m] = out
        ws[-1][0, half_m:] = -out

    # -- passes ----------------------------------------------------------

    def _forward_acts(self, X: np.ndarray) -> list[np.ndarray]:
        """Activations per layer; index 0 is the input batch."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.d:
            raise ValueError(f"expected padded contexts of dimension {self.d}, got {X.shape[1]}")
        acts = [X]
        a = X
        for w in self.weights[:-1]:
            a = np.maximum(a @ w.T, 0.0)
            acts.append(a)
        return acts

    def forward_many(self, X: np.ndarray) -> np.ndarray:
        """Scalar outputs for a batch of padded contexts, shape (n,)."""
        acts = self._forward_acts(X)
        w_out = self.weights[-1][0]
        half = self.m // 2
        # Summing the halves separately makes the mirrored-init cancellation
        # exact: identical hidden streams against opposed output weights.
        return acts[-1][:, :half] @ w_out[:half] + acts[-1][:, half:] @ w_out[half:]

    def forward(self, x: np.ndarray) -> float:
        return float(self.forward_many(np.asarray(x)[None, :])[0])

    def grads_many(self, X: np.ndarray) -> np.ndarray:
        """Per-sample parameter gradients d h(x)/d theta, shape (n, p)."""
        acts = self._forward_acts(X)
        n = acts[0].shape[0]
        ws = self.weights
        out = np.empty((n, self.num_params))
        sl_out, _ = self.layer_slices[-1]
        out[:, sl_out] = acts[-1]
        delta = np.broadcast_to(ws[-1], (n, self.m)).copy()  # upstream of the last hidden layer
        for l in range(self.depth - 2, -1, -1):
            delta = delta * (acts[l + 1] > 0.0)
            sl, shp = self.layer_slices[l]
            out[:, sl] = np.einsum("ni,nj->nij", delta, acts[l]).reshape(n, shp[0] * shp[1])
            if l > 0:
                delta = delta @ ws[l]
        return out

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.grads_many(np.asarray(x)[None, :])[0]

    def weighted_sum_grads(self, X: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """``sum_s coeffs_s * grad(x_s)`` without materializing per-sample grads."""
        acts = self._forward_acts(X)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        ws = self.weights
        out = np.zeros(self.num_params)
        sl_out, _ = self.layer_slices[-1]
        out[sl_out] = coeffs @ acts[-1]
        delta = coeffs[:, None] * ws[-1]
        for l in range(self.depth - 2, -1, -1):
            delta = delta * (acts[l + 1] > 0.0)
            sl, shp = self.layer_slices[l]
            out[sl] = (delta.T @ acts[l]).ravel()
            if l > 0:
                delta = delta @ ws[l]
        return out

    def pair_grad_sum(self, X1: np.ndarray, X2: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """``sum_s coeffs_s * (grad(x1_s) - grad(x2_s))`` -- the data term of the loss gradient."""
        return self.weighted_sum_grads(X1, coeffs) - self.weighted_sum_grads(X2, coeffs)
