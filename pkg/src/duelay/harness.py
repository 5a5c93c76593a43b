"""Experiment orchestration: configs, seeded runs, traces, and file output.

A run is fully determined by (config, seed).  All randomness flows through
named substreams keyed by the seed, so variants sharing a seed face identical
environments, arm sets, delay draws and preference-noise uniforms -- only the
chosen actions differ.  Suites write one CSV of per-round traces and one JSON
summary; both are byte-stable across repeated invocations, seed order and
execution parallelism.

CSV schema: ``algo,variant,seed,t,inst_regret,cum_regret`` with floats at 17
significant digits.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .delay import DelayModel
from .environment import Environment, RewardKind
from .linear_mle import default_kappa_mu
from .linear_policy import LinearPolicy, LinearPolicyConfig
from .neural_policy import NeuralPolicy, NeuralPolicyConfig, TrainConfig
from .rng import substream

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

ALGOS = ("linear", "neural")
VARIANTS = ("ipw", "ignore", "heuristic")

CSV_HEADER = "algo,variant,seed,t,inst_regret,cum_regret"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    algo: str = "linear"
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    horizon: int = 2000
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    env_kind: str = "linear"
    d: int = 20
    K: int = 20
    delay_kind: str = "geometric"
    delay_p: float | None = 0.3
    delay_c: int | None = None
    M: int = 3
    lam: float = 0.5
    kappa_mu: float = field(default_factory=default_kappa_mu)
    delta: float = 0.1
    feature_bound: float = 2.0
    beta_scale: float = 1.0
    norm_bound: float = 1.0
    width: int = 64
    depth: int = 2
    nu_scale: float = 1.0
    train_learning_rate: float = 0.01
    train_epochs: int = 200
    train_grad_tol: float = 1e-3
    name: str = ""

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"variant must be one of {VARIANTS}, got {v!r}")
        if not self.variants:
            raise ConfigError("need at least one variant")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        try:
            RewardKind(self.env_kind)
            self.delay_model()
            for v in self.variants:
                self.policy_config(v)  # triggers nested validation
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- builders --------------------------------------------------------

    def delay_model(self) -> DelayModel:
        return DelayModel(self.delay_kind, M=self.M, p=self.delay_p, c=self.delay_c)

    def policy_config(self, variant: str):
        rho = self.delay_model().rho
        if self.algo == "linear":
            return LinearPolicyConfig(
                lam=self.lam,
                M=self.M,
                rho=rho,
                kappa_mu=self.kappa_mu,
                delta=self.delta,
                feature_bound=self.feature_bound,
                variant=variant,
                beta_scale=self.beta_scale,
            )
        return NeuralPolicyConfig(
            lam=self.lam,
            M=self.M,
            rho=rho,
            kappa_mu=self.kappa_mu,
            delta=self.delta,
            norm_bound=self.norm_bound,
            width=self.width,
            depth=self.depth,
            variant=variant,
            nu_scale=self.nu_scale,
            train=TrainConfig(
                learning_rate=self.train_learning_rate,
                epochs=self.train_epochs,
                grad_tol=self.train_grad_tol,
            ),
        )

    @classmethod
    def from_toml(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        exp = raw.get("experiment", {})
        env = raw.get("env", {})
        delay = raw.get("delay", {})
        pol = raw.get("policy", {})
        train = pol.get("train", {})
        kwargs = {}

        def take(section, key, target, cast):
            if key in section:
                kwargs[target] = cast(section[key])

        take(exp, "algo", "algo", str)
        take(exp, "variants", "variants", list)
        take(exp, "horizon", "horizon", int)
        take(exp, "name", "name", str)
        if "seeds" in exp:
            kwargs["seeds"] = [int(s) for s in exp["seeds"]]
        elif "num_seeds" in exp:
            start = int(exp.get("seed_start", 0))
            kwargs["seeds"] = list(range(start, start + int(exp["num_seeds"])))
        take(env, "kind", "env_kind", str)
        take(env, "d", "d", int)
        take(env, "K", "K", int)
        take(delay, "kind", "delay_kind", str)
        take(delay, "p", "delay_p", float)
        take(delay, "c", "delay_c", int)
        take(delay, "M", "M", int)
        take(pol, "lambda", "lam", float)
        take(pol, "kappa_mu", "kappa_mu", float)
        take(pol, "delta", "delta", float)
        take(pol, "L", "feature_bound", float)
        take(pol, "beta_scale", "beta_scale", float)
        take(pol, "B", "norm_bound", float)
        take(pol, "width", "width", int)
        take(pol, "depth", "depth", int)
        take(pol, "nu_scale", "nu_scale", float)
        take(train, "learning_rate", "train_learning_rate", float)
        take(train, "epochs", "train_epochs", int)
        take(train, "grad_tol", "train_grad_tol", float)
        if kwargs.get("delay_kind") == "constant":
            kwargs.setdefault("delay_p", None)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad config field: {exc}") from exc


@dataclass
class RegretTrace:
    """Per-round instantaneous and cumulative regret for one seeded run."""

    algo: str
    variant: str
    seed: int
    inst: np.ndarray
    cum: np.ndarray
    first: np.ndarray  # chosen first-arm indices, not serialized
    second: np.ndarray

    @property
    def final(self) -> float:
        return float(self.cum[-1])


def seed_offset() -> int:
    return int(os.environ.get("DUELAY_SEED_OFFSET", "0") or 0)


def run_single(config: ExperimentConfig, seed: int, variant: str | None = None) -> RegretTrace:
    """One deterministic run of (config, seed, variant)."""
    if variant is None:
        variant = config.variants[0]
    env = Environment(RewardKind(config.env_kind), config.d, config.K, seed)
    delay_model = config.delay_model()
    pref_rng = substream(seed, "pref")
    delay_rng = substream(seed, "delay")
    pcfg = config.policy_config(variant)
    if config.algo == "linear":
        policy = LinearPolicy(config.d, pcfg)
    else:
        policy = NeuralPolicy(config.d, pcfg, seed)

    T = config.horizon
    inst = np.zeros(T)
    first = np.zeros(T, dtype=np.int64)
    second = np.zeros(T, dtype=np.int64)
    for t in range(1, T + 1):
        arms = env.draw_arms(t)
        i, j = policy.step(arms, env, delay_model, pref_rng, delay_rng)
        inst[t - 1] = env.instantaneous_regret(arms, arms.X[i], arms.X[j])
        first[t - 1], second[t - 1] = i, j

    if config.algo == "linear":
        budget = policy.information_gain_budget()
        if policy.info_gain_sum > budget + 1e-9:
            raise AssertionError(
                f"information-gain sum {policy.info_gain_sum:.6g} exceeds budget {budget:.6g}"
            )
    return RegretTrace(
        algo=config.algo,
        variant=variant,
        seed=seed,
        inst=inst,
        cum=np.cumsum(inst),
        first=first,
        second=second,
    )


def _worker(args) -> tuple[str, int, RegretTrace]:
    config_dict, seed, variant = args
    config = ExperimentConfig(**config_dict)
    return variant, seed, run_single(config, seed, variant)


def run_suite(config: ExperimentConfig, out_dir: str | None = None, jobs: int = 1) -> dict:
    """Run every (variant, seed) pair; write traces.csv and summary.json.

    Results are aggregated in sorted seed order, so the outputs do not depend
    on scheduling or on the order seeds were listed in the config.
    """
    seeds = sorted(int(s) + seed_offset() for s in config.seeds)
    tasks = [(asdict(config), seed, v) for v in config.variants for seed in seeds]
    results: dict[tuple[str, int], RegretTrace] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for variant, seed, trace in pool.map(_worker, tasks):
                results[(variant, seed)] = trace
    else:
        for args in tasks:
            variant, seed, trace = _worker(args)
            results[(variant, seed)] = trace

    summary = {
        "algo": config.algo,
        "env_kind": config.env_kind,
        "horizon": config.horizon,
        "seeds": seeds,
        "name": config.name,
        "variants": {},
    }
    for v in config.variants:
        finals = np.array([results[(v, s)].final for s in seeds])
        curves = np.vstack([results[(v, s)].cum for s in seeds])
        n = len(seeds)
        stderr = float(np.std(finals, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        summary["variants"][v] = {
            "n_seeds": n,
            "mean_final_regret": float(np.mean(finals)),
            "stderr_final_regret": stderr,
            "mean_curve": [float(x) for x in curves.mean(axis=0)],
            "per_seed_final": [[int(s), float(results[(v, s)].final)] for s in seeds],
        }

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "traces.csv")
        json_path = os.path.join(out_dir, "summary.json")
        try:
            with open(csv_path, "w", newline="\n") as fh:
                fh.write(CSV_HEADER + "\n")
                for v in config.variants:
                    for s in seeds:
                        tr = results[(v, s)]
                        for t in range(config.horizon):
                            fh.write(
                                f"{tr.algo},{tr.variant},{tr.seed},{t + 1},"
                                f"{tr.inst[t]:.17g},{tr.cum[t]:.17g}\n"
                            )
            with open(json_path, "w", newline="\n") as fh:
                json.dump(summary, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise RuntimeError(f"failed writing outputs under {out_dir}: {exc}") from exc
    return summary


def demo_config(setting: str, horizon: int | None = None, num_seeds: int | None = None) -> ExperimentConfig:
    """Built-in synthetic comparison configs at desk scale."""
    if setting == "linear":
        cfg = ExperimentConfig(
            algo="linear",
            env_kind="linear",
            horizon=horizon or 2000,
            seeds=list(range(num_seeds or 20)),
            name="demo-linear",
        )
    elif setting in ("quadratic", "cubic"):
        cfg = ExperimentConfig(
            algo="neural",
            env_kind=setting,
            horizon=horizon or 500,
            seeds=list(range(num_seeds or 10)),
            name=f"demo-{setting}",
        )
    else:
        raise ConfigError(f"unknown demo setting: {setting!r}")
    return cfg


def demo_toml(config: ExperimentConfig) -> str:
    """Render a config as the TOML schema the CLI reads back."""
    lines = [
        "[experiment]",
        f'name = "{config.name}"',
        f'algo = "{config.algo}"',
        "variants = [" + ", ".join(f'"{v}"' for v in config.variants) + "]",
        f"horizon = {config.horizon}",
        "seeds = [" + ", ".join(str(s) for s in config.seeds) + "]",
        "",
        "[env]",
        f'kind = "{config.env_kind}"',
        f"d = {config.d}",
        f"K = {config.K}",
        "",
        "[delay]",
        f'kind = "{config.delay_kind}"',
    ]
    if config.delay_kind == "geometric":
        lines.append(f"p = {config.delay_p}")
    if config.delay_kind == "constant":
        lines.append(f"c = {config.delay_c}")
    lines += [
        f"M = {config.M}",
        "",
        "[policy]",
        f"lambda = {config.lam}",
        f"kappa_mu = {config.kappa_mu!r}",
        f"delta = {config.delta}",
        f"L = {config.feature_bound}",
        f"beta_scale = {config.beta_scale}",
    ]
    if config.algo == "neural":
        lines += [
            f"B = {config.norm_bound}",
            f"width = {config.width}",
            f"depth = {config.depth}",
            f"nu_scale = {config.nu_scale}",
            "",
            "[policy.train]",
            f"learning_rate = {config.train_learning_rate}",
            f"epochs = {config.train_epochs}",
            f"grad_tol = {config.train_grad_tol}",
        ]
    return "\n".join(lines) + "\n"
