"""Inverse-probability-weighted regularized logistic estimation.

The loss over rows ``(dphi_s, p_s)`` with pseudo-label ``p_s`` (which may
exceed 1 after reweighting by 1/rho) is

    L(theta) = -sum_s [ p_s log mu(z_s) + (1 - p_s) log mu(-z_s) ] + (lam/2) |theta|^2,

with ``z_s = theta . dphi_s`` and ``mu`` the logistic link.  Whatever the
labels, the Hessian is ``sum_s mu'(z_s) dphi dphi^T + lam I >= lam I``, so the
problem stays strictly convex and a damped Newton solve is exact business.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve


def sigmoid(z):
    """Numerically stable logistic link, elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def log_sigmoid(z):
    """log mu(z), stable for large |z|."""
    return -np.logaddexp(0.0, -np.asarray(z, dtype=np.float64))


def sigmoid_deriv(z):
    """mu'(z) = mu(z) mu(-z)."""
    s = sigmoid(z)
    return s * (1.0 - s)


def default_kappa_mu(score_bound: float = 1.0, feature_bound: float = 2.0) -> float:
    """Lower bound on mu' over the reachable score range |theta.dphi| <= S*L."""
    return float(sigmoid_deriv(score_bound * feature_bound))


class ConvergenceError(RuntimeError):
    """Newton failed to reach the gradient tolerance within max_iters."""

    def __init__(self, grad_norm: float, iters: int):
        super().__init__(f"Newton stopped after {iters} iterations at |grad| = {grad_norm:.3e}")
        self.grad_norm = grad_norm
        self.iters = iters


@dataclass
class MleConfig:
    lam: float
    kappa_mu: float = field(default_factory=default_kappa_mu)
    grad_tol: float = 1e-8
    max_iters: int = 100

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not 0.0 < self.kappa_mu <= 0.25:
            raise ValueError(f"kappa_mu must lie in (0, 1/4], got {self.kappa_mu}")


@dataclass
class ObservedDataset:
    """Feature differences and pseudo-labels entering the weighted loss."""

    feats: np.ndarray   # (n, d)
    labels: np.ndarray  # (n,), values in [0, 1/rho]

    def __post_init__(self):
        self.feats = np.atleast_2d(np.asarray(self.feats, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.feats.shape[0] != self.labels.shape[0]:
            raise ValueError("feature and label counts disagree")

    @classmethod
    def empty(cls, d: int) -> "ObservedDataset":
        return cls(np.zeros((0, d)), np.zeros(0))

    def __len__(self) -> int:
        return self.labels.shape[0]


def ipw_loss(theta: np.ndarray, data: ObservedDataset, cfg: MleConfig) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    reg = 0.5 * cfg.lam * float(theta @ theta)
    if len(data) == 0:
        return reg
    z = data.feats @ theta
    ll = data.labels * log_sigmoid(z) + (1.0 - data.labels) * log_sigmoid(-z)
    return -float(np.sum(ll)) + reg


def ipw_grad(theta: np.ndarray, data: ObservedDataset, cfg: MleConfig) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if len(data) == 0:
        return cfg.lam * theta
    z = data.feats @ theta
    return data.feats.T @ (sigmoid(z) - data.labels) + cfg.lam * theta


def ipw_hessian(theta: np.ndarray, data: ObservedDataset, cfg: MleConfig) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    d = theta.shape[0]
    if len(data) == 0:
        return cfg.lam * np.eye(d)
    w = sigmoid_deriv(data.feats @ theta)
    return (data.feats * w[:, None]).T @ data.feats + cfg.lam * np.eye(d)


def solve_mle(
    data: ObservedDataset,
    cfg: MleConfig,
    warm_start: np.ndarray | None = None,
) -> np.ndarray:
    """Damped-Newton minimizer of the weighted loss.

    Strict convexity (Hessian >= lam I) makes the minimizer unique, so the
    result is warm-start independent up to the gradient tolerance.
    """
    d = data.feats.shape[1]
    theta = np.zeros(d) if warm_start is None else np.array(warm_start, dtype=np.float64)
    loss = ipw_loss(theta, data, cfg)
    grad = ipw_grad(theta, data, cfg)
    for it in range(cfg.max_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < cfg.grad_tol:
            return theta
        hess = ipw_hessian(theta, data, cfg)
        step = cho_solve(cho_factor(hess), grad)
        slope = float(grad @ step)  # descent rate along -step, positive
        # Armijo backtracking keeps far-from-optimum Newton honest.  The
        # slack term admits steps whose true decrease is below the float
        # resolution of the loss, where the line search would otherwise
        # stall with the gradient still above tolerance.
        noise = 1e-12 * (1.0 + abs(loss))
        alpha = 1.0
        while True:
            cand = theta - alpha * step
            cand_loss = ipw_loss(cand, data, cfg)
            if cand_loss <= loss - 1e-4 * alpha * slope + noise:
                break
            alpha *= 0.5
            if alpha < 1e-12:
                raise ConvergenceError(gnorm, it)
        theta, loss = cand, cand_loss
        grad = ipw_grad(theta, data, cfg)
    gnorm = float(np.linalg.norm(grad))
    if gnorm < cfg.grad_tol:
        return theta
    raise ConvergenceError(gnorm, cfg.max_iters)
