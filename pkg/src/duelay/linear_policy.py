"""Linear dueling-bandit policy under censored delayed feedback.

Each round: deliver any feedback whose delay has elapsed, refit the weighted
logistic estimate, pick the greedy first arm, pick the second arm by an upper
confidence bound relative to the first, play the duel, enqueue its feedback
with a sampled delay, and fold the played feature difference into the design
matrix immediately (features are observed at play time, only labels lag).

Three dataset treatments share all of the selection machinery:

  ipw        every played round enters the loss; an arrived label y counts as
             y/rho, everything still pending or censored counts as zero.  The
             reweighting exactly offsets the zeroed-out mass, keeping the
             estimating equation unbiased.
  ignore     only arrived feedback enters, unweighted.
  heuristic  arrived feedback enters unweighted; pending and censored rounds
             are imputed with the current model's predicted preference
             probability, recomputed every round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .delay import DelayModel, DuelRecord, PendingQueue
from .environment import ArmSet, Environment
from .linalg import InfoMatrix
from .linear_mle import MleConfig, ObservedDataset, default_kappa_mu, sigmoid, solve_mle

VARIANTS = ("ipw", "ignore", "heuristic")


@dataclass
class LinearPolicyConfig:
    lam: float
    M: int
    rho: float
    kappa_mu: float = field(default_factory=default_kappa_mu)
    delta: float = 0.1
    feature_bound: float = 2.0  # bound L on |phi(x) - phi(x')|
    variant: str = "ipw"
    beta_scale: float = 1.0
    grad_tol: float = 1e-8
    max_iters: int = 100

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.lam > self.kappa_mu * self.feature_bound**2:
            raise ValueError(
                f"need lam > kappa_mu * L^2 = {self.kappa_mu * self.feature_bound**2:.4g}, got lam = {self.lam}"
            )

    def mle_config(self) -> MleConfig:
        return MleConfig(
            lam=self.lam,
            kappa_mu=self.kappa_mu,
            grad_tol=self.grad_tol,
            max_iters=self.max_iters,
        )


def beta_t(cfg: LinearPolicyConfig, t: int, d: int) -> float:
    """Confidence radius: noise term + delay bias term + regularization term.

    Monotone non-decreasing in t; ``beta_scale`` multiplies the whole radius
    (the theory-consistent bonus divides this by rho * kappa_mu).
    """
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    noise = np.sqrt(
        2.0 * np.log(1.0 / cfg.delta)
        + d * np.log1p(t * cfg.feature_bound**2 * cfg.kappa_mu / (d * cfg.lam))
    )
    bias = cfg.M * cfg.feature_bound
    reg = np.sqrt(cfg.lam * cfg.kappa_mu)
    return cfg.beta_scale * float(noise + bias + reg)


class _PairLog:
    """Growable log of played feature differences and their labels."""

    def __init__(self, d: int, capacity: int = 256):
        self.dphi = np.zeros((capacity, d))
        self.y = np.zeros(capacity)
        self.delivered = np.zeros(capacity, dtype=bool)
        self.n = 0

    def append(self, dphi: np.ndarray) -> None:
        if self.n == self.dphi.shape[0]:
            grow = self.dphi.shape[0]
            self.dphi = np.vstack([self.dphi, np.zeros_like(self.dphi)])
            self.y = np.concatenate([self.y, np.zeros(grow)])
            self.delivered = np.concatenate([self.delivered, np.zeros(grow, dtype=bool)])
        self.dphi[self.n] = dphi
        self.n += 1

    def mark_delivered(self, s: int, y: int) -> None:
        self.delivered[s - 1] = True
        self.y[s - 1] = y


class LinearPolicy:
    """Stateful per-run policy; mutate only through :meth:`step`."""

    def __init__(self, d: int, cfg: LinearPolicyConfig):
        self.d = int(d)
        self.cfg = cfg
        self.theta = np.zeros(d)
        self.V = InfoMatrix(d, cfg.lam / cfg.kappa_mu)
        self.pending = PendingQueue()
        self.log = _PairLog(d)
        self.t = 1
        self.info_gain_sum = 0.0  # running sum of |dphi_t|^2 in the V_{t-1} inverse norm
        self._mle_cfg = cfg.mle_config()

    # -- selection -------------------------------------------------------

    def select_first_arm(self, arms: ArmSet) -> int:
        """Greedy argmax of theta . x; ties go to the lowest index."""
        if len(arms) == 0:
            raise ValueError("empty arm set")
        return int(np.argmax(arms.X @ self.theta))

    def select_second_arm(self, arms: ArmSet, first: int) -> int:
        """UCB relative to the first arm; picking the first again scores 0."""
        diff = arms.X - arms.X[first]
        bonus = beta_t(self.cfg, self.t, self.d) / (self.cfg.rho * self.cfg.kappa_mu)
        scores = diff @ self.theta + bonus * self.V.weighted_norms(diff, use_inverse=True)
        return int(np.argmax(scores))

    # -- dataset ---------------------------------------------------------

    def observed_dataset(self) -> ObservedDataset:
        n = self.log.n
        feats = self.log.dphi[:n]
        delivered = self.log.delivered[:n]
        y = self.log.y[:n]
        if self.cfg.variant == "ipw":
            labels = np.where(delivered & (y == 1), 1.0 / self.cfg.rho, 0.0)
            return ObservedDataset(feats.copy(), labels)
        if self.cfg.variant == "ignore":
            return ObservedDataset(feats[delivered].copy(), y[delivered].copy())
        labels = np.where(delivered, y, sigmoid(feats @ self.theta))
        return ObservedDataset(feats.copy(), labels)

    # -- main loop -------------------------------------------------------

    def step(
        self,
        arms: ArmSet,
        env: Environment,
        delay_model: DelayModel,
        pref_rng: np.random.Generator,
        delay_rng: np.random.Generator,
    ) -> tuple[int, int]:
        t = self.t
        if arms.round != t:
            raise ValueError(f"arm set is for round {arms.round}, policy is at round {t}")
        for rec in self.pending.poll(t, self.cfg.M):
            self.log.mark_delivered(rec.s, rec.y)
        self.theta = solve_mle(self.observed_dataset(), self._mle_cfg, warm_start=self.theta)
        i1 = self.select_first_arm(arms)
        i2 = self.select_second_arm(arms, i1)
        x1, x2 = arms.X[i1], arms.X[i2]

        y = env.sample_preference(x1, x2, pref_rng)
        delay = delay_model.sample_delay(delay_rng)
        self.pending.push(DuelRecord(s=t, x1=x1, x2=x2, y=y, delay=delay))

        dphi = x1 - x2
        self.log.append(dphi)
        self.info_gain_sum += self.V.weighted_norm(dphi, use_inverse=True) ** 2
        self.V.rank_one_update(dphi)
        self.t += 1
        return i1, i2

    def information_gain_budget(self) -> float:
        """Upper bound 2 d log(1 + T L^2 kappa / (d lam)) for the gain sum."""
        T = self.t - 1
        return 2.0 * self.d * float(
            np.log1p(T * self.cfg.feature_bound**2 * self.cfg.kappa_mu / (self.d * self.cfg.lam))
        )
