"""Iteration loop shared by the linear, nonlinear and smooth fits."""
from __future__ import annotations

import logging
import math

import numpy as np

from .acyclicity import h_khop, k_at_iteration
from .diffusion import sample_timesteps
from .exceptions import NumericalError
from .optimizer import AdamState, AugmentedLagrangianState, adam_step, bootstrap_batch, dag_penalty

log = logging.getLogger(__name__)

# sub-streams derived from (seed, iteration)
_TIMESTEP_STREAM = 1
_NOISE_STREAM = 2


def noise_seed(seed, tau):
    return [int(seed), int(tau), _NOISE_STREAM]


def run_training(X, params, objective, config, d=None):
    """Optimise ``params`` in place.

    ``objective(X0, t, noise_seed, k, penalty)`` returns ``(components, grads)``
    where ``components`` holds at least ``loss`` (total objective) and ``h``
    (k-hop constraint at the current ``W``), and ``grads`` mirrors ``params``.
    ``params["W"]`` gets its diagonal zeroed after every step. When
    ``config.average_tail`` is positive, the parameters are replaced at the
    end by the mean of the iterates over that final fraction of iterations.

    Returns the history as a list of dict rows.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    d = X.shape[1] if d is None else d
    cfg = config
    N = cfg.n_iter
    T = cfg.noise_schedule.T
    state = AdamState()
    al = None
    inner = N
    if cfg.penalty_mode == "augmented_lagrangian":
        al = AugmentedLagrangianState(rho=cfg.al_rho_init, rho_max=cfg.al_rho_max)
        inner = max(1, N // cfg.al_rounds)

    W = params["W"]
    np.fill_diagonal(W, 0.0)
    avg_start = N - int(round(cfg.average_tail * N)) if cfg.average_tail > 0 else N
    sums = {key: np.zeros_like(p) for key, p in params.items()} if avg_start < N else None
    history = []
    for tau in range(N):
        idx = bootstrap_batch(n, cfg.batch_size, cfg.seed, tau)
        t = sample_timesteps(cfg.batch_size, T, [int(cfg.seed), tau, _TIMESTEP_STREAM])
        k = k_at_iteration(tau, N, d, cfg.khop_schedule)
        penalty = dag_penalty(tau, N, cfg.penalty_mode, cfg.lambda_dag_max, al)
        components, grads = objective(X[idx], t, noise_seed(cfg.seed, tau), k, penalty)

        loss = components["loss"]
        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            diag = {"iteration": tau, "k": k, **{key: float(v) for key, v in components.items()}}
            raise NumericalError(f"non-finite loss at iteration {tau}: {diag}", diag)

        adam_step(state, params, grads, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon)
        np.fill_diagonal(W, 0.0)

        if sums is not None and tau >= avg_start:
            for key, p in params.items():
                sums[key] += p

        if al is not None and (tau + 1) % inner == 0:
            al.update(h_khop(W, k, cfg.khop_schedule.gamma, with_grad=False).value)

        if tau % cfg.log_every == 0 or tau == N - 1:
            row = {"iter": tau, "loss": float(loss), "h": float(components["h"]), "k": k,
                   "lambda_dag": float(penalty.slope(0.0) if al is None else penalty.alpha)}
            for key, v in components.items():
                if key not in row:
                    row[key] = float(v)
            if al is not None:
                row["rho"] = float(al.rho)
            history.append(row)
            log.debug("iter %d loss %.6g h %.3g k %d", tau, loss, components["h"], k)
    if sums is not None:
        for key, p in params.items():
            p[...] = sums[key] / (N - avg_start)
    return history
