"""Synthetic dueling environments.

A ground-truth direction on the unit sphere defines a latent utility that is
linear, quadratic or cubic in the score ``theta* . x``.  Arm sets are drawn
uniformly on the unit ball, fresh each round; binary preferences follow the
Bradley-Terry-Luce model under the logistic link.  The environment also acts
as the regret oracle, since it knows the true utility.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .linear_mle import sigmoid
from .rng import substream


class RewardKind(Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    CUBIC = "cubic"


@dataclass
class ArmSet:
    """Feature vectors offered at one round; rows of X are the arms."""

    X: np.ndarray  # (K, d)
    round: int

    def __len__(self) -> int:
        return self.X.shape[0]


class Environment:
    """Seeded synthetic environment with a unit-norm ground-truth parameter."""

    def __init__(self, kind: RewardKind, d: int, K: int, seed: int):
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        if K < 2:
            raise ValueError(f"K must be >= 2, got {K}")
        self.kind = RewardKind(kind)
        self.d = int(d)
        self.K = int(K)
        self.seed = int(seed)
        g = substream(seed, "theta").standard_normal(d)
        self.theta_star = g / np.linalg.norm(g)

    def draw_arms(self, t: int) -> ArmSet:
        """K arms i.i.d. uniform on the unit ball, deterministic in (seed, t)."""
        if t < 1:
            raise ValueError(f"round index must be >= 1, got {t}")
        rng = substream(self.seed, "arms", t)
        g = rng.standard_normal((self.K, self.d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        radii = rng.random(self.K) ** (1.0 / self.d)
        return ArmSet(X=g * radii[:, None], round=t)

    def reward(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"expected arm of dimension {self.d}, got shape {x.shape}")
        s = float(self.theta_star @ x)
        if self.kind is RewardKind.LINEAR:
            return s
        if self.kind is RewardKind.QUADRATIC:
            return s * s
        return s * s * s

    def rewards(self, X: np.ndarray) -> np.ndarray:
        """Vectorised reward over rows of X."""
        s = np.asarray(X, dtype=np.float64) @ self.theta_star
        if self.kind is RewardKind.LINEAR:
            return s
        if self.kind is RewardKind.QUADRATIC:
            return s * s
        return s * s * s

    def sample_preference(self, x1: np.ndarray, x2: np.ndarray, rng: np.random.Generator) -> int:
        """1 with probability sigmoid(f(x1) - f(x2)); consumes one uniform."""
        p = sigmoid(self.reward(x1) - self.reward(x2))
        return int(rng.random() < p)

    def instantaneous_regret(self, arms: ArmSet, x1: np.ndarray, x2: np.ndarray) -> float:
        """``2 max_x f(x) - f(x1) - f(x2)`` over the offered arm set."""
        for x in (x1, x2):
            if not np.any(np.all(arms.X == np.asarray(x), axis=1)):
                raise ValueError("played arm is not a member of the offered arm set")
        best = float(np.max(self.rewards(arms.X)))
        # summed as two nonnegative gaps so rounding can never go below zero
        return (best - self.reward(x1)) + (best - self.reward(x2))
