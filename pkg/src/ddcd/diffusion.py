"""Forward diffusion: noise schedules, timestep sampling and one-step perturbation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

SCHEDULE_KINDS = ("linear", "cosine", "power")
COSINE_OFFSET = 0.008


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable diffusion schedule.

    Timesteps are 1-indexed: ``betas[t - 1]`` and ``alpha_bars[t - 1]`` belong
    to step ``t``. The implicit ``alpha_bar_0 = 1`` is never stored.
    """

    kind: str
    T: int
    beta_start: float
    beta_end: float
    power_exponent: float = 2.0
    betas: np.ndarray = field(default=None, repr=False, compare=False)
    alpha_bars: np.ndarray = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "T": int(self.T),
            "beta_start": float(self.beta_start),
            "beta_end": float(self.beta_end),
            "power_exponent": float(self.power_exponent),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return build_schedule(
            d.get("kind", "linear"),
            int(d.get("T", 5000)),
            float(d.get("beta_start", 1e-4)),
            float(d.get("beta_end", 0.02)),
            float(d.get("power_exponent", 2.0)),
        )


@dataclass
class DiffusionBatch:
    X0: np.ndarray
    X_t: np.ndarray
    t: np.ndarray
    Z: np.ndarray
    sqrt_abar: np.ndarray
    sqrt_one_minus_abar: np.ndarray

    @property
    def noise(self) -> np.ndarray:
        """Row-scaled injected noise ``diag(sqrt(1 - abar)) Z``."""
        return self.sqrt_one_minus_abar[:, None] * self.Z


def build_schedule(kind="linear", T=5000, beta_start=1e-4, beta_end=0.02, power_exponent=2.0):
    if kind not in SCHEDULE_KINDS:
        raise ValidationError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    T = int(T)
    if T < 2:
        raise ValidationError(f"T must be >= 2, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValidationError(
            f"need 0 < beta_start <= beta_end < 1, got beta_start={beta_start}, beta_end={beta_end}"
        )
    if kind == "power" and power_exponent <= 0:
        raise ValidationError(f"power_exponent must be positive, got {power_exponent}")

    frac = np.arange(T, dtype=float) / (T - 1)
    if kind == "linear":
        betas = beta_start + frac * (beta_end - beta_start)
    elif kind == "power":
        betas = beta_start + frac**power_exponent * (beta_end - beta_start)
    else:
        s = COSINE_OFFSET
        steps = np.arange(T + 1, dtype=float) / T
        f = np.cos((steps + s) / (1 + s) * np.pi / 2) ** 2
        abar = f / f[0]
        betas = np.clip(1.0 - abar[1:] / abar[:-1], beta_start, 0.999)

    alpha_bars = np.cumprod(1.0 - betas)
    return NoiseSchedule(
        kind=kind,
        T=T,
        beta_start=float(beta_start),
        beta_end=float(beta_end),
        power_exponent=float(power_exponent),
        betas=betas,
        alpha_bars=alpha_bars,
    )


def sample_timesteps(b, T, seed):
    """I.i.d. uniform timesteps on ``{1, ..., T}``."""
    if b < 1:
        raise ValidationError(f"batch size must be >= 1, got {b}")
    rng = np.random.default_rng(seed)
    return rng.integers(1, int(T) + 1, size=int(b))


def perturb(X0, schedule: NoiseSchedule, t, seed=None, Z=None) -> DiffusionBatch:
    """Perturb each row of ``X0`` to its own timestep in one shot.

    ``Z`` may be supplied to replay a known noise draw; otherwise it is
    sampled from ``seed``.
    """
    X0 = np.asarray(X0, dtype=float)
    t = np.asarray(t, dtype=np.int64).reshape(-1)
    if X0.ndim != 2 or X0.shape[0] != t.shape[0]:
        raise ValidationError(f"X0 shape {X0.shape} does not match {t.shape[0]} timesteps")
    if t.size and (t.min() < 1 or t.max() > schedule.T):
        raise ValidationError(f"timesteps must lie in [1, {schedule.T}]")
    if Z is None:
        Z = np.random.default_rng(seed).standard_normal(X0.shape)
    else:
        Z = np.asarray(Z, dtype=float)
        if Z.shape != X0.shape:
            raise ValidationError(f"Z shape {Z.shape} does not match X0 shape {X0.shape}")
    abar = schedule.alpha_bars[t - 1]
    sa = np.sqrt(abar)
    so = np.sqrt(1.0 - abar)
    X_t = sa[:, None] * X0 + so[:, None] * Z
    return DiffusionBatch(X0=X0, X_t=X_t, t=t, Z=Z, sqrt_abar=sa, sqrt_one_minus_abar=so)
