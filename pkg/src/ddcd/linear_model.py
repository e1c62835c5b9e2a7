"""DDCD-Linear: denoising objective for linear SEMs and its fit loop."""
from __future__ import annotations

import numpy as np

from .acyclicity import h_khop
from .diffusion import perturb
from .exceptions import ValidationError
from .graph_synth import Dataset, break_cycles
from .optimizer import TrainConfig, default_config
from .training import run_training


def penalties(W, lambda1, lambda2):
    """L1 + squared-L2 penalty value and (sub)gradient."""
    value = lambda1 * np.abs(W).sum() + lambda2 * np.sum(W * W)
    grad = lambda1 * np.sign(W) + 2.0 * lambda2 * W
    return value, grad


def denoising_loss_linear(batch, W, lambda1=0.0, lambda2=0.0):
    """Denoising loss and gradient for a linear SEM.

    ``(1/2b) ||(X_t - X_t W) - diag(sqrt(1 - abar)) Z (I - W)||_F^2`` plus
    the L1 and squared-L2 penalties. The diagonal of the gradient is zero.
    """
    W = np.asarray(W, dtype=float)
    b, d = batch.X_t.shape
    if W.shape != (d, d):
        raise ValidationError(f"W shape {W.shape} does not match batch width {d}")
    U = batch.X_t - batch.noise
    R = U - U @ W
    loss = 0.5 / b * np.sum(R * R)
    grad = -(U.T @ R) / b
    pen, pen_grad = penalties(W, lambda1, lambda2)
    grad += pen_grad
    np.fill_diagonal(grad, 0.0)
    return float(loss + pen), grad


def theorem1_identity(X0, W, schedule, t, Z):
    """Largest entrywise gap between the scaled SEM residual and the denoising residual.

    The two sides are ``diag(sqrt(abar)) (X0 - X0 W)`` and
    ``(X_t - X_t W) - diag(sqrt(1 - abar)) Z (I - W)`` with ``X_t``
    rebuilt from ``(X0, Z, t)``.
    """
    X0 = np.asarray(X0, dtype=float)
    W = np.asarray(W, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if W.shape != (X0.shape[1], X0.shape[1]) or Z.shape != X0.shape:
        raise ValidationError(f"inconsistent shapes X0 {X0.shape}, W {W.shape}, Z {Z.shape}")
    batch = perturb(X0, schedule, t, Z=Z)
    I = np.eye(W.shape[0])
    lhs = batch.sqrt_abar[:, None] * (X0 - X0 @ W)
    rhs = (batch.X_t - batch.X_t @ W) - batch.noise @ (I - W)
    return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0


def linear_objective(W, config, debug=False):
    """Closure evaluating the full DDCD-Linear training objective on one batch."""
    schedule = config.noise_schedule
    gamma = config.khop_schedule.gamma

    def objective(X0, t, seed, k, penalty):
        batch = perturb(X0, schedule, t, seed)
        loss, grad = denoising_loss_linear(batch, W, config.lambda1, config.lambda2)
        hk = h_khop(W, k, gamma)
        grad += penalty.slope(hk.value) * hk.gradient
        np.fill_diagonal(grad, 0.0)
        components = {"loss": loss + penalty.value(hk.value), "denoise": loss, "h": hk.value}
        if debug:
            resid = theorem1_identity(X0, W, schedule, t, batch.Z)
            scale = max(1.0, float(np.abs(X0).max()), float(np.abs(W).max()))
            assert resid <= 1e-10 * scale**2, f"denoising identity broken: residual {resid}"
        return components, {"W": grad}

    return objective


def fit_linear(data, config: TrainConfig | None = None, debug=False):
    """Fit DDCD-Linear; returns the unthresholded ``W_hat`` and the history rows."""
    config = config or default_config("linear")
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if X.shape[0] < 2:
        raise ValidationError("need at least two samples")
    d = X.shape[1]
    W = np.zeros((d, d))
    history = run_training(X, {"W": W}, linear_objective(W, config, debug), config)
    if config.prune_cycles:
        W = break_cycles(W, config.threshold)[0]
    return W, history
