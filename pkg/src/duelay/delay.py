"""Censored stochastic-delay observation model.

Feedback played at round ``s`` with sampled delay ``D`` becomes observable at
round ``s + D`` -- but only if ``D <= M``; anything slower is censored and
never delivered.  The arrival probability ``rho = P(D <= M)`` is a known,
closed-form property of the delay model, and the inverse-probability weight
``1{D <= min(M, t - s)} / rho`` is the correction that keeps weighted
feedback means unbiased despite the censoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DelayModel:
    """Delay distribution plus the hard observation threshold M.

    Supported kinds: geometric (support {1, 2, ...}), constant, none
    (delay exactly one round, nothing censored).
    """

    def __init__(self, kind: str, M: int, p: float | None = None, c: int | None = None):
        if M < 1:
            raise ValueError(f"threshold M must be >= 1, got {M}")
        self.kind = kind
        self.M = int(M)
        self.p = p
        self.c = c
        if kind == "geometric":
            if p is None or not 0.0 < p <= 1.0:
                raise ValueError(f"geometric delay needs success probability in (0, 1], got {p}")
            self.rho = 1.0 - (1.0 - p) ** M
        elif kind == "constant":
            if c is None or c < 1:
                raise ValueError(f"constant delay needs c >= 1, got {c}")
            if c > M:
                raise ValueError(
                    f"constant delay {c} exceeds threshold M={M}: rho = 0 and the weighting is undefined"
                )
            self.rho = 1.0
        elif kind == "none":
            self.rho = 1.0
        else:
            raise ValueError(f"unknown delay kind: {kind!r}")

    @classmethod
    def geometric(cls, p: float, M: int) -> "DelayModel":
        return cls("geometric", M=M, p=p)

    @classmethod
    def constant(cls, c: int, M: int) -> "DelayModel":
        return cls("constant", M=M, c=c)

    @classmethod
    def none(cls, M: int = 1) -> "DelayModel":
        return cls("none", M=M)

    def sample_delay(self, rng: np.random.Generator) -> int:
        """Draw one delay; the geometric branch consumes exactly one uniform."""
        if self.kind == "geometric":
            if self.p == 1.0:
                rng.random()  # keep stream alignment across parameter choices
                return 1
            u = rng.random()
            # Inverse CDF of P(D = k) = p (1-p)^(k-1), k >= 1.
            return max(1, math.ceil(math.log1p(-u) / math.log1p(-self.p)))
        if self.kind == "constant":
            return self.c
        return 1


def rho_of(model: DelayModel) -> float:
    """Arrival probability P(D <= M) of the model."""
    return model.rho


def ipw_weight(s: int, t: int, D: int, M: int, rho: float) -> float:
    """``1{D <= min(M, t - s)} / rho``: either 0 or exactly 1/rho."""
    if not s < t:
        raise ValueError(f"need s < t, got s={s}, t={t}")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    return 1.0 / rho if D <= min(M, t - s) else 0.0


@dataclass
class DuelRecord:
    """One played pair with its pending feedback."""

    s: int  # round played
    x1: np.ndarray
    x2: np.ndarray
    y: int  # preference generated at play time, revealed on delivery
    delay: int
    delivered: bool = False


@dataclass
class PendingQueue:
    """Undelivered duel records, owned by a single run."""

    records: list[DuelRecord] = field(default_factory=list)

    def push(self, rec: DuelRecord) -> None:
        self.records.append(rec)

    def poll(self, t: int, M: int) -> list[DuelRecord]:
        """Deliver every record with ``s + D <= t`` and ``D <= M``.

        Censored records (D > M) are dropped permanently once ``t > s + M``;
        a second poll at the same t returns nothing.
        """
        if t < 1:
            raise ValueError(f"round index must be >= 1, got {t}")
        arrived: list[DuelRecord] = []
        kept: list[DuelRecord] = []
        for rec in self.records:
            if rec.delay <= M and rec.s + rec.delay <= t:
                rec.delivered = True
                arrived.append(rec)
            elif rec.delay > M and t >= rec.s + M + 1:
                pass  # censored: never delivered, no need to retain
            else:
                kept.append(rec)
        self.records = kept
        return arrived

    def __len__(self) -> int:
        return len(self.records)
