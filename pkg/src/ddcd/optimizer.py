"""Adam, DAG-penalty schedules, bootstrap batching and the training config."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .acyclicity import KHopSchedule
from .diffusion import NoiseSchedule, build_schedule
from .exceptions import ValidationError

PENALTY_MODES = ("linear", "augmented_lagrangian")
MODELS = ("linear", "nonlinear", "smooth")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(state: AdamState, params: dict, grads: dict, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update, applied in place to every array in ``params``."""
    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    for name, p in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params


@dataclass
class DagPenalty:
    """Penalty ``alpha * h + rho / 2 * h**2``; its h-derivative is ``alpha + rho * h``."""

    alpha: float
    rho: float = 0.0

    def value(self, h):
        return self.alpha * h + 0.5 * self.rho * h * h

    def slope(self, h):
        return self.alpha + self.rho * h


@dataclass
class AugmentedLagrangianState:
    alpha: float = 0.0
    rho: float = 1.0
    rho_max: float = 1e16
    shrink: float = 0.25
    h_prev: float = float("inf")
    rounds: int = 0

    def update(self, h):
        """Close an outer round with constraint value ``h``.

        The dual variable takes a step of size rho; rho is then raised
        tenfold if h did not shrink below ``shrink * h_prev``.
        """
        self.alpha += self.rho * h
        if h > self.shrink * self.h_prev:
            self.rho = min(self.rho * 10.0, self.rho_max)
        self.h_prev = h
        self.rounds += 1


def dag_penalty(tau, N_iter, mode="linear", lambda_dag_max=100.0, al_state=None) -> DagPenalty:
    if not 0 <= tau < N_iter:
        raise ValidationError(f"tau must satisfy 0 <= tau < N_iter, got tau={tau}, N_iter={N_iter}")
    if mode == "linear":
        return DagPenalty(alpha=lambda_dag_max * tau / N_iter)
    if mode == "augmented_lagrangian":
        if al_state is None:
            raise ValidationError("augmented_lagrangian mode needs an AugmentedLagrangianState")
        return DagPenalty(alpha=al_state.alpha, rho=al_state.rho)
    raise ValidationError(f"unknown penalty mode {mode!r}")


def bootstrap_batch(n, B, seed, round):
    """``B`` row indices drawn uniformly with replacement from ``range(n)``."""
    if n < 1 or B < 1:
        raise ValidationError(f"need n >= 1 and B >= 1, got n={n}, B={B}")
    rng = np.random.default_rng([int(seed), int(round)])
    return rng.integers(0, int(n), size=int(B))


@dataclass
class TrainConfig:
    n_iter: int = 5000
    batch_size: int = 256
    learning_rate: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    lambda1: float = 1e-2
    lambda2: float = 1e-2
    lambda_dag_max: float = 100.0
    penalty_mode: str = "linear"
    al_rounds: int = 10
    al_rho_init: float = 1.0
    al_rho_max: float = 1e16
    khop_schedule: KHopSchedule = field(default_factory=KHopSchedule)
    noise_schedule: NoiseSchedule = field(default_factory=build_schedule)
    threshold: float = 0.3
    # fraction of final iterations whose iterates are averaged into the result
    average_tail: float = 0.1
    # zero the weakest cycle edges after fitting so |W| > threshold is a DAG
    prune_cycles: bool = True
    seed: int = 0
    log_every: int = 100
    # nonlinear / smooth models
    hidden_width: int = 16
    latent_weight: float = 1.0
    standardize_latent: bool = True
    train_normalizer: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = ("n_iter", "batch_size", "learning_rate", "adam_epsilon", "al_rounds", "log_every", "hidden_width")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("lambda1", "lambda2", "lambda_dag_max", "threshold", "latent_weight"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValidationError("Adam betas must lie in [0, 1)")
        if self.penalty_mode not in PENALTY_MODES:
            raise ValidationError(f"penalty_mode must be one of {PENALTY_MODES}, got {self.penalty_mode!r}")
        if not 0 <= self.average_tail < 1:
            raise ValidationError(f"average_tail must lie in [0, 1), got {self.average_tail}")
        if self.penalty_mode == "augmented_lagrangian" and self.al_rounds > self.n_iter:
            raise ValidationError("al_rounds cannot exceed n_iter")

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.to_dict() if hasattr(value, "to_dict") else value
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), indent=kwargs.pop("indent", 2), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "khop_schedule" in d:
            d["khop_schedule"] = KHopSchedule.from_dict(d["khop_schedule"])
        if "noise_schedule" in d:
            d["noise_schedule"] = NoiseSchedule.from_dict(d["noise_schedule"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls.from_dict(json.loads(text))


def default_config(model="linear", **overrides) -> TrainConfig:
    """Model-tuned defaults on top of :class:`TrainConfig`; keyword overrides win."""
    if model not in MODELS:
        raise ValidationError(f"unknown model {model!r}; expected one of {MODELS}")
    base = {
        "linear": {"lambda_dag_max": 1e4},
        "nonlinear": {"n_iter": 1000, "learning_rate": 5e-2},
        "smooth": {"threshold": 0.1},
    }[model]
    base.update(overrides)
    return TrainConfig(**base)


__all__ = [
    "AdamState",
    "AugmentedLagrangianState",
    "DagPenalty",
    "TrainConfig",
    "adam_step",
    "bootstrap_batch",
    "dag_penalty",
    "default_config",
]
