"""Neural dueling-bandit policy under censored delayed feedback.

Mirrors the linear policy's round structure but scores arms with a ReLU
network trained on the weighted preference loss, and replaces raw feature
differences with network-gradient differences *at the frozen initialization*
(tangent features) everywhere uncertainty is measured: both the information
matrix and the exploration bonus use g(.; theta_0), never the trained
parameters.

The loss regularizer is ``(m * lam / 2) |theta - theta_0|^2``: with tangent
features scaled by 1/sqrt(m), that is a ridge weight of lam in feature space,
and it is the scaling under which the parameter-drift bound
``|theta_t - theta_0| <= sqrt(2 t / (m lam))`` follows from
``loss(theta_t) <= loss(theta_0) = (t-1) log 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .delay import DelayModel, DuelRecord, PendingQueue
from .environment import ArmSet, Environment
from .linalg import InfoMatrix
from .linear_mle import default_kappa_mu, log_sigmoid, sigmoid
from .neural_model import SymmetricMlp, normalize_and_pad
from .rng import substream

VARIANTS = ("ipw", "ignore", "heuristic")


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    grad_tol: float = 1e-3


@dataclass
class NeuralPolicyConfig:
    lam: float
    M: int
    rho: float
    kappa_mu: float = field(default_factory=default_kappa_mu)
    delta: float = 0.1
    norm_bound: float = 1.0  # B, bound on sqrt(m) |theta_f - theta_0|
    width: int = 64
    depth: int = 2
    variant: str = "ipw"
    nu_scale: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.norm_bound < 0:
            raise ValueError(f"norm bound B must be nonnegative, got {self.norm_bound}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


class _DuelLog:
    """Growable log of played padded pairs and their labels."""

    def __init__(self, d_pad: int, capacity: int = 256):
        self.x1 = np.zeros((capacity, d_pad))
        self.x2 = np.zeros((capacity, d_pad))
        self.y = np.zeros(capacity)
        self.delivered = np.zeros(capacity, dtype=bool)
        self.n = 0

    def append(self, x1p: np.ndarray, x2p: np.ndarray) -> None:
        if self.n == self.x1.shape[0]:
            grow = self.x1.shape[0]
            self.x1 = np.vstack([self.x1, np.zeros_like(self.x1)])
            self.x2 = np.vstack([self.x2, np.zeros_like(self.x2)])
            self.y = np.concatenate([self.y, np.zeros(grow)])
            self.delivered = np.concatenate([self.delivered, np.zeros(grow, dtype=bool)])
        self.x1[self.n] = x1p
        self.x2[self.n] = x2p
        self.n += 1

    def mark_delivered(self, s: int, y: int) -> None:
        self.delivered[s - 1] = True
        self.y[s - 1] = y


class NeuralPolicy:
    """Stateful per-run policy; mutate only through :meth:`step`."""

    def __init__(self, d_raw: int, cfg: NeuralPolicyConfig, seed: int):
        self.cfg = cfg
        self.d_pad = 2 * int(d_raw)
        self.net = SymmetricMlp(self.d_pad, cfg.width, cfg.depth, substream(seed, "init"))
        self.net0 = self.net.clone()  # frozen initialization, never trained
        self.theta0 = self.net0.get_theta()
        self.V = InfoMatrix(self.net.num_params, cfg.lam / cfg.kappa_mu)
        self.pending = PendingQueue()
        self.log = _DuelLog(self.d_pad)
        self.t = 1
        self.last_train_epochs = 0
        self.last_train_grad_norm = 0.0

    # -- tangent features -------------------------------------------------

    def ntk_feature(self, x1p: np.ndarray, x2p: np.ndarray) -> np.ndarray:
        """g(x1; theta_0) - g(x2; theta_0), always at the frozen init."""
        return self.net0.grad(x1p) - self.net0.grad(x2p)

    def sigma(self, x1p: np.ndarray, x2p: np.ndarray) -> float:
        """Exploration bonus: scaled inverse-design norm of the tangent feature."""
        feat = self.ntk_feature(x1p, x2p) / np.sqrt(self.cfg.width)
        return float(
            np.sqrt(self.cfg.lam / self.cfg.kappa_mu) * self.V.weighted_norm(feat, use_inverse=True)
        )

    def nu_T(self) -> float:
        """Bonus multiplier from the running log-det proxy of effective dimension.

        The confidence radius is divided by rho only for the ipw variant; the
        delay term M / (kappa m rho) is kept for all variants.
        """
        cfg = self.cfg
        d_eff = max(self.V.logdet - self.V.logdet0, 0.0)
        beta = np.sqrt(d_eff + 2.0 * np.log(1.0 / cfg.delta)) / cfg.kappa_mu
        rho_div = cfg.rho if cfg.variant == "ipw" else 1.0
        radius = (
            beta / rho_div
            + cfg.norm_bound * np.sqrt(cfg.lam / cfg.kappa_mu)
            + 1.0
            + cfg.M / (cfg.kappa_mu * cfg.width * cfg.rho)
        )
        return cfg.nu_scale * float(radius * cfg.kappa_mu / cfg.lam)

    # -- training ----------------------------------------------------------

    def _materialize(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.log.n
        x1, x2 = self.log.x1[:n], self.log.x2[:n]
        delivered, y = self.log.delivered[:n], self.log.y[:n]
        if self.cfg.variant == "ipw":
            labels = np.where(delivered & (y == 1), 1.0 / self.cfg.rho, 0.0)
            return x1, x2, labels
        if self.cfg.variant == "ignore":
            return x1[delivered], x2[delivered], y[delivered]
        dh = self.net.forward_many(x1) - self.net.forward_many(x2)
        labels = np.where(delivered, y, sigmoid(dh))
        return x1, x2, labels

    def _loss(self, X1: np.ndarray, X2: np.ndarray, labels: np.ndarray) -> float:
        reg_w = self.cfg.width * self.cfg.lam
        dev = self.net.theta - self.theta0
        reg = 0.5 * reg_w * float(dev @ dev)
        if labels.shape[0] == 0:
            return reg
        dh = self.net.forward_many(X1) - self.net.forward_many(X2)
        ll = labels * log_sigmoid(dh) + (1.0 - labels) * log_sigmoid(-dh)
        return -float(np.sum(ll)) + reg

    def _loss_grad(self, X1: np.ndarray, X2: np.ndarray, labels: np.ndarray) -> np.ndarray:
        reg_w = self.cfg.width * self.cfg.lam
        g = reg_w * (self.net.theta - self.theta0)
        if labels.shape[0] == 0:
            return g
        dh = self.net.forward_many(X1) - self.net.forward_many(X2)
        coeffs = sigmoid(dh) - labels
        return self.net.pair_grad_sum(X1, X2, coeffs) + g

    def train_network(self) -> None:
        """Full-batch gradient descent, warm-started, halving the step on any
        loss increase; accepted steps decrease the loss monotonically.

        Descent is best effort (the objective is non-convex), but the final
        loss never exceeds the loss at the initialization parameters.
        """
        X1, X2, labels = self._materialize()
        if labels.shape[0] == 0:
            # Pure regularizer: the exact minimizer is the initialization.
            self.net.set_theta(self.theta0)
            return
        theta, loss = self._descend(X1, X2, labels, self.net.get_theta())
        at_init = self._loss_at(X1, X2, labels, self.theta0)
        if loss > at_init:
            theta, loss = self._descend(X1, X2, labels, self.theta0.copy())
            if loss > at_init:
                theta = self.theta0.copy()
        self.net.set_theta(theta)

    def _loss_at(self, X1, X2, labels, theta: np.ndarray) -> float:
        saved = self.net.get_theta()
        self.net.set_theta(theta)
        val = self._loss(X1, X2, labels)
        self.net.set_theta(saved)
        return val

    def _descend(self, X1, X2, labels, start: np.ndarray) -> tuple[np.ndarray, float]:
        cfg = self.cfg.train
        self.net.set_theta(start)
        loss = self._loss(X1, X2, labels)
        lr = cfg.learning_rate
        budget = cfg.epochs
        gnorm = 0.0
        used = 0
        while budget > 0:
            g = self._loss_grad(X1, X2, labels)
            gnorm = float(np.linalg.norm(g))
            if gnorm < cfg.grad_tol:
                break
            theta_old = self.net.get_theta()
            prev_loss = loss
            accepted = False
            while budget > 0 and lr >= 1e-12:
                budget -= 1
                used += 1
                self.net.set_theta(theta_old - lr * g)
                cand = self._loss(X1, X2, labels)
                if cand <= loss:
                    loss = cand
                    accepted = True
                    break
                lr *= 0.5
            if not accepted:
                self.net.set_theta(theta_old)
                break
            if prev_loss - loss < 1e-9 + 1e-7 * abs(loss):
                break  # progress below resolution worth paying epochs for
        self.last_train_epochs = used
        self.last_train_grad_norm = gnorm
        return self.net.get_theta(), loss

    # -- selection ----------------------------------------------------------

    def select_pair(self, arms: ArmSet) -> tuple[int, int]:
        if len(arms) < 2:
            raise ValueError("need at least two arms")
        Xp = normalize_and_pad(arms.X)
        h = self.net.forward_many(Xp)
        i1 = int(np.argmax(h))
        feats0 = self.net0.grads_many(Xp)
        diff = (feats0 - feats0[i1]) / np.sqrt(self.cfg.width)
        sig = np.sqrt(self.cfg.lam / self.cfg.kappa_mu) * self.V.weighted_norms(
            diff, use_inverse=True
        )
        i2 = int(np.argmax(h + self.nu_T() * sig))
        self._feats0 = feats0  # reused by step for the design update
        return i1, i2

    # -- main loop -----------------------------------------------------------

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
        # Feedback only counts once strictly older than the current round, so
        # the round-t training set is everything arrived by t-1.
        if t > 1:
            for rec in self.pending.poll(t - 1, self.cfg.M):
                self.log.mark_delivered(rec.s, rec.y)
        self.train_network()
        i1, i2 = self.select_pair(arms)
        x1, x2 = arms.X[i1], arms.X[i2]

        y = env.sample_preference(x1, x2, pref_rng)
        delay = delay_model.sample_delay(delay_rng)
        self.pending.push(DuelRecord(s=t, x1=x1, x2=x2, y=y, delay=delay))

        Xp = normalize_and_pad(np.vstack([x1, x2]))
        self.log.append(Xp[0], Xp[1])
        g = self._feats0[i1] - self._feats0[i2]
        self.V.rank_one_update(g, scale=1.0 / self.cfg.width)
        self.t += 1
        return i1, i2

    # -- diagnostics ----------------------------------------------------------

    def drift(self) -> float:
        return float(np.linalg.norm(self.net.theta - self.theta0))

    def drift_bound(self, t: int | None = None) -> float:
        """``sqrt(2 t / (m lam))`` with t the number of rounds played so far."""
        if t is None:
            t = self.t - 1
        return float(np.sqrt(2.0 * max(t, 1) / (self.cfg.width * self.cfg.lam)))
