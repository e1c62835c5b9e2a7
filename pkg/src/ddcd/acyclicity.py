"""Continuous acyclicity scores and the k-hop curriculum.

Two families are provided:

* ``h_exponential``: ``tr(exp(W * W)) - d``, evaluated with a
  scaling-and-squaring Taylor exponential.
* ``h_khop``: the same power series truncated after ``k + 1`` terms, with an
  optional scale ``gamma`` applied inside the powers and divided back out.

Both vanish exactly on acyclic supports and return an analytic gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError

_TAYLOR_ORDER = 18


@dataclass
class AcyclicityResult:
    value: float
    gradient: np.ndarray | None


@dataclass(frozen=True)
class KHopSchedule:
    """Piecewise-constant k curriculum over training progress.

    ``phase_k`` has one more entry than ``phase_boundaries``; ``None`` stands
    for the node count d.
    """

    phase_boundaries: tuple = (0.4, 0.9)
    phase_k: tuple = (3, 10, None)
    gamma: float = 1.0

    def __post_init__(self):
        b = tuple(float(x) for x in self.phase_boundaries)
        ks = tuple(None if k is None else int(k) for k in self.phase_k)
        object.__setattr__(self, "phase_boundaries", b)
        object.__setattr__(self, "phase_k", ks)
        if len(ks) != len(b) + 1:
            raise ValidationError("phase_k needs exactly one more entry than phase_boundaries")
        if any(not 0.0 < x < 1.0 for x in b) or any(x >= y for x, y in zip(b, b[1:])):
            raise ValidationError(f"phase boundaries must be strictly increasing in (0, 1): {b}")
        if ks[-1] is not None:
            raise ValidationError("the final phase must use k = d (None)")
        if any(k is not None and k < 1 for k in ks):
            raise ValidationError("every phase k must be >= 1")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")

    def to_dict(self) -> dict:
        return {
            "phase_boundaries": list(self.phase_boundaries),
            "phase_k": list(self.phase_k),
            "gamma": float(self.gamma),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KHopSchedule":
        return cls(
            tuple(d.get("phase_boundaries", (0.4, 0.9))),
            tuple(d.get("phase_k", (3, 10, None))),
            float(d.get("gamma", 1.0)),
        )


def _check_square(W):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {W.shape}")
    return W


def expm(A):
    """Matrix exponential by scaling and squaring around a Taylor core."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    norm = np.abs(A).sum(axis=0).max() if d else 0.0
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
    A = A / 2.0**s
    E = np.eye(d)
    term = np.eye(d)
    for j in range(1, _TAYLOR_ORDER + 1):
        term = term @ A / j
        E = E + term
    for _ in range(s):
        E = E @ E
    return E


def h_exponential(W, with_grad=True) -> AcyclicityResult:
    W = _check_square(W)
    E = expm(W * W)
    value = float(np.trace(E) - W.shape[0])
    grad = 2.0 * E.T * W if with_grad else None
    return AcyclicityResult(value, grad)


def h_khop(W, k, gamma=1.0, with_grad=True) -> AcyclicityResult:
    """Truncated series ``sum_{j=1}^{k+1} tr((gW o gW)^j) / (j! g^(2j))``.

    Powers of ``A = gamma^2 (W o W)`` are carried as a running product, so
    each extra hop costs one matrix multiply; the last term needs only a
    trace, taken elementwise.
    """
    W = _check_square(W)
    k = int(k)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if not gamma > 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    d = W.shape[0]
    g2 = float(gamma) ** 2
    A = g2 * (W * W)
    AT = A.T

    # coef[j] = 1 / (j! gamma^(2j)); d tr(A^j)/dM = j g2 (A^{j-1})^T, and
    # j * g2 * coef[j] == coef[j-1], so the gradient is sum_j coef[j] (A^j)^T.
    P = np.eye(d)
    coef = 1.0
    value = 0.0
    G = np.eye(d) if with_grad else None
    for j in range(1, k + 2):
        coef_next = coef / (j * g2)
        if coef_next == 0.0:
            break
        if j == k + 1:
            value += coef_next * float(np.sum(P * AT))
            break
        P = P @ A
        value += coef_next * float(np.trace(P))
        if with_grad:
            G += coef_next * P.T
        coef = coef_next
    grad = 2.0 * W * G if with_grad else None
    return AcyclicityResult(value, grad)


def k_at_iteration(tau, N_iter, d, schedule: KHopSchedule | None = None) -> int:
    """Hop count for training iteration ``tau``, capped at ``d``."""
    schedule = schedule or KHopSchedule()
    if not 0 <= tau < N_iter:
        raise ValidationError(f"tau must satisfy 0 <= tau < N_iter, got tau={tau}, N_iter={N_iter}")
    phase = 0
    for boundary in schedule.phase_boundaries:
        if tau >= boundary * N_iter:
            phase += 1
    k = schedule.phase_k[phase]
    return int(d) if k is None else min(int(k), int(d))
