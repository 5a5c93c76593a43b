"""Dueling bandits under censored stochastic feedback delays.

Linear and neural pairwise-preference policies with inverse-probability
weighting, plus ignore/impute baselines, synthetic environments, and a
seeded experiment harness.
"""

from .delay import DelayModel, DuelRecord, PendingQueue, ipw_weight, rho_of
from .environment import ArmSet, Environment, RewardKind
from .harness import ExperimentConfig, RegretTrace, demo_config, run_single, run_suite
from .linalg import InfoMatrix
from .linear_mle import (
    ConvergenceError,
    MleConfig,
    ObservedDataset,
    default_kappa_mu,
    ipw_grad,
    ipw_hessian,
    ipw_loss,
    sigmoid,
    solve_mle,
)
from .linear_policy import LinearPolicy, LinearPolicyConfig, beta_t
from .neural_model import SymmetricMlp, normalize_and_pad, pad_context
from .neural_policy import NeuralPolicy, NeuralPolicyConfig, TrainConfig
from .rng import substream

__all__ = [
    "ArmSet",
    "ConvergenceError",
    "DelayModel",
    "DuelRecord",
    "Environment",
    "ExperimentConfig",
    "InfoMatrix",
    "LinearPolicy",
    "LinearPolicyConfig",
    "MleConfig",
    "NeuralPolicy",
    "NeuralPolicyConfig",
    "ObservedDataset",
    "PendingQueue",
    "RegretTrace",
    "RewardKind",
    "SymmetricMlp",
    "TrainConfig",
    "beta_t",
    "default_kappa_mu",
    "demo_config",
    "ipw_grad",
    "ipw_hessian",
    "ipw_loss",
    "ipw_weight",
    "normalize_and_pad",
    "pad_context",
    "rho_of",
    "run_single",
    "run_suite",
    "sigmoid",
    "solve_mle",
    "substream",
]
