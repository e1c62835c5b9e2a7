"""Independent reference implementations used as test oracles.

Each one is written differently from the package code it checks: explicit
matrix powers and factorials instead of running products, scipy and
networkx instead of the in-house exponential and topological sort, scalar
loops instead of vectorised updates.
"""
import math

import networkx as nx
import numpy as np
import scipy.linalg


def h_exp_oracle(W):
    W = np.asarray(W, dtype=float)
    return float(np.trace(scipy.linalg.expm(W * W)) - W.shape[0])


def h_series_oracle(W, k, gamma=1.0):
    """Truncated series through power k+1 using matrix_power and factorials."""
    W = np.asarray(W, dtype=float)
    M = (gamma * W) * (gamma * W)
    total = 0.0
    for j in range(1, k + 2):
        total += np.trace(np.linalg.matrix_power(M, j)) / (math.factorial(j) * gamma ** (2 * j))
    return float(total)


def is_dag_oracle(adj):
    G = nx.DiGraph()
    d = np.asarray(adj).shape[0]
    G.add_nodes_from(range(d))
    G.add_edges_from(zip(*np.nonzero(np.asarray(adj))))
    return nx.is_directed_acyclic_graph(G)


def metrics_oracle(pred, truth):
    """Pairwise enumeration of the directed accuracy counts."""
    P = np.asarray(pred) != 0
    G = np.asarray(truth) != 0
    d = P.shape[0]
    tp = rev = fp = cond_pos = pred_pos = 0
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            cond_pos += bool(G[i, j])
            if not P[i, j]:
                continue
            pred_pos += 1
            if G[i, j]:
                tp += 1
            elif G[j, i]:
                rev += 1
            else:
                fp += 1
    extra = missing = cond_neg = 0
    for i in range(d):
        for j in range(i + 1, d):
            in_pred = P[i, j] or P[j, i]
            in_true = G[i, j] or G[j, i]
            cond_neg += not in_true
            extra += in_pred and not in_true
            missing += in_true and not in_pred
    return {
        "tp": tp, "rev": rev, "fp": fp, "pred_pos": pred_pos, "cond_pos": cond_pos, "cond_neg": cond_neg,
        "extra": extra, "missing": missing, "shd": rev + extra + missing,
        "tpr": tp / cond_pos if cond_pos else 1.0,
        "fdr": (rev + fp) / pred_pos if pred_pos else 0.0,
        "fpr": (rev + fp) / cond_neg if cond_neg else 0.0,
    }


def central_diff(f, x, eps=1e-5, skip=None):
    """Central-difference gradient of scalar ``f`` at array ``x`` (modified in place and restored)."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        if skip is not None and skip(idx):
            continue
        old = x[idx]
        x[idx] = old + eps
        fp = f()
        x[idx] = old - eps
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * eps)
    return g


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))))


def adam_scalar_oracle(w0, grad_fn, steps, lr=1e-2, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook Adam on a single float."""
    w, m, v = float(w0), 0.0, 0.0
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        w = w - lr * mhat / (math.sqrt(vhat) + eps)
    return w


def schedule_oracle(kind, T, beta_start, beta_end, p=2.0):
    """Betas and alpha-bars from per-step formulas and a running product loop."""
    betas, abars, prod = [], [], 1.0
    for t in range(1, T + 1):
        frac = (t - 1) / (T - 1)
        if kind == "linear":
            b = beta_start + frac * (beta_end - beta_start)
        elif kind == "power":
            b = beta_start + frac**p * (beta_end - beta_start)
        else:
            s = 0.008

            def f(u):
                return math.cos((u / T + s) / (1 + s) * math.pi / 2) ** 2

            b = min(max(1 - f(t) / f(t - 1), beta_start), 0.999)
        prod *= 1 - b
        betas.append(b)
        abars.append(prod)
    return np.array(betas), np.array(abars)


def linear_denoise_oracle(X_t, Z, abar, W, l1=0.0, l2=0.0):
    """Denoising loss written straight from its definition, row by row."""
    b, d = X_t.shape
    I = np.eye(d)
    total = 0.0
    for r in range(b):
        resid = (X_t[r] - X_t[r] @ W) - math.sqrt(1 - abar[r]) * (Z[r] @ (I - W))
        total += float(resid @ resid)
    return total / (2 * b) + l1 * np.abs(W).sum() + l2 * (W**2).sum()


def random_dag(rng, d, p=0.4, low=0.5, high=2.0):
    """Random permuted lower-triangular weighted DAG (independent of gen_dag)."""
    L = np.tril(rng.random((d, d)) < p, k=-1)
    W = L * rng.uniform(low, high, (d, d)) * rng.choice([-1.0, 1.0], (d, d))
    perm = rng.permutation(d)
    return W[np.ix_(perm, perm)]
