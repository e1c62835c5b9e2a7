"""Thresholding, graph metrics and benchmark sweeps."""
from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .exceptions import ValidationError
from .graph_synth import GraphSpec, SemSpec, gen_dag, is_dag, simulate_sem
from .optimizer import MODELS, TrainConfig, default_config

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = {"linear": 0.3, "nonlinear": 0.3, "smooth": 0.1}


@dataclass
class EvalReport:
    shd: int
    shd_reversed: int
    shd_extra: int
    shd_missing: int
    tpr: float
    fdr: float
    fpr: float
    true_positive: int
    false_positive: int
    reversed: int
    prediction_positive: int
    condition_positive: int
    condition_negative: int
    pred_is_dag: bool = True
    runtime_seconds: float = float("nan")
    config_fingerprint: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def threshold_edges(W, omega):
    """Binary adjacency of entries with ``|W[i, j]| > omega``; the diagonal is never an edge."""
    if omega < 0:
        raise ValidationError(f"omega must be non-negative, got {omega}")
    B = (np.abs(np.asarray(W, dtype=float)) > omega).astype(int)
    np.fill_diagonal(B, 0)
    return B


def compute_metrics(pred, truth) -> EvalReport:
    """Directed-graph accuracy counts.

    A predicted edge is a true positive when it matches a true edge in
    direction, a reversal when only its reverse is true, and a false
    positive otherwise. SHD adds reversals to the unordered pairs that are
    adjacent in one graph but not the other.
    """
    P = np.asarray(pred) != 0
    G = np.asarray(truth) != 0
    if P.shape != G.shape or P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError(f"shape mismatch: pred {P.shape}, truth {G.shape}")
    d = P.shape[0]
    P = P & ~np.eye(d, dtype=bool)
    G = G & ~np.eye(d, dtype=bool)
    pred_is_dag = is_dag(P)
    if not pred_is_dag:
        log.warning("predicted graph contains a cycle; metrics computed anyway")

    tp = int(np.sum(P & G))
    rev = int(np.sum(P & ~G & G.T))
    fp = int(np.sum(P & ~G & ~G.T))
    pred_pos = int(P.sum())
    cond_pos = int(G.sum())

    iu = np.triu_indices(d, k=1)
    pred_skel = (P | P.T)[iu]
    true_skel = (G | G.T)[iu]
    cond_neg = int(np.sum(~true_skel))
    extra = int(np.sum(pred_skel & ~true_skel))
    missing = int(np.sum(true_skel & ~pred_skel))

    return EvalReport(
        shd=rev + extra + missing,
        shd_reversed=rev,
        shd_extra=extra,
        shd_missing=missing,
        tpr=tp / cond_pos if cond_pos else 1.0,
        fdr=(rev + fp) / pred_pos if pred_pos else 0.0,
        fpr=(rev + fp) / cond_neg if cond_neg else 0.0,
        true_positive=tp,
        false_positive=fp,
        reversed=rev,
        prediction_positive=pred_pos,
        condition_positive=cond_pos,
        condition_negative=cond_neg,
        pred_is_dag=pred_is_dag,
    )


def skeleton_tpr(pred, truth):
    """Fraction of true adjacent pairs that are adjacent in ``pred``, ignoring direction."""
    P = np.asarray(pred) != 0
    G = np.asarray(truth) != 0
    if P.shape != G.shape:
        raise ValidationError(f"shape mismatch: pred {P.shape}, truth {G.shape}")
    iu = np.triu_indices(P.shape[0], k=1)
    true_skel = (G | G.T)[iu]
    if not true_skel.any():
        return 1.0
    return float(np.sum((P | P.T)[iu] & true_skel) / true_skel.sum())


# ---------------------------------------------------------------- benchmark

LONG_COLUMNS = ["family", "d", "degree", "mechanism", "noise_std", "model", "n", "seed", "shd", "shd_rev", "shd_extra",
                "shd_miss", "tpr", "fdr", "fpr", "runtime_s", "config_fp", "error"]
METRIC_COLUMNS = ["shd", "shd_rev", "shd_extra", "shd_miss", "tpr", "fdr", "fpr", "runtime_s"]


@dataclass
class BenchCell:
    """One grid cell: a data-generating setting, a model and the seeds to run."""

    graph: GraphSpec
    sem: SemSpec
    model: str = "linear"
    config: TrainConfig | None = None
    seeds: tuple = (0,)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValidationError(f"unknown model {self.model!r}; expected one of {MODELS}")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValidationError("a cell needs at least one seed")
        if self.config is None:
            self.config = default_config(self.model)

    def label(self):
        g, m = self.graph, self.sem
        return {"family": g.family, "d": g.d, "degree": g.expected_degree, "mechanism": m.mechanism,
                "noise_std": m.noise_std, "model": self.model, "n": m.n}

    def key(self, seed):
        return row_key({**self.label(), "config_fp": config_fingerprint(self.config), "seed": seed})


def config_fingerprint(config: TrainConfig) -> str:
    from .io import fingerprint

    return fingerprint(config.to_dict())


def make_dataset(graph: GraphSpec, sem: SemSpec, seed):
    """Ground truth and data for one seed; the model plays no part in it."""
    gt = gen_dag(replace(graph, seed=int(seed)))
    data = simulate_sem(gt, sem, seed=[int(seed), 7])
    return gt, data


def fit_model(model, data, config):
    """Dispatch to the model's fit routine; returns the unthresholded W."""
    from .linear_model import fit_linear
    from .neural_models import fit_nonlinear, fit_smooth

    if model == "linear":
        return fit_linear(data, config)[0]
    if model == "nonlinear":
        return fit_nonlinear(data, config)[0]
    return fit_smooth(data, config)[0]


def _run_one(cell: BenchCell, seed):
    row = {**cell.label(), "seed": seed, "config_fp": config_fingerprint(cell.config), "error": ""}
    try:
        gt, data = make_dataset(cell.graph, cell.sem, seed)
        cfg = cell.config.replace(seed=int(seed))
        t0 = time.perf_counter()
        W = fit_model(cell.model, data, cfg)
        runtime = time.perf_counter() - t0
        rep = compute_metrics(threshold_edges(W, cfg.threshold), gt.binary)
        row.update(shd=rep.shd, shd_rev=rep.shd_reversed, shd_extra=rep.shd_extra, shd_miss=rep.shd_missing,
                   tpr=rep.tpr, fdr=rep.fdr, fpr=rep.fpr, runtime_s=runtime)
    except Exception as exc:  # a failed cell is reported in-band and the sweep goes on
        log.warning("cell %s seed %s failed: %s", cell.label(), seed, exc)
        row.update({c: float("nan") for c in METRIC_COLUMNS})
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_benchmark(grid, done=None, workers=1):
    """Generate, fit and score every (cell, seed) pair.

    ``done`` maps run keys to rows from an earlier, interrupted sweep; those
    runs are reused instead of recomputed. Returns ``(rows, aggregate_rows)``
    with rows in grid order whatever the worker count.
    """
    grid = list(grid)
    if not grid:
        raise ValidationError("benchmark grid is empty")
    done = done or {}
    jobs = [(i, cell, seed) for i, cell in enumerate(grid) for seed in cell.seeds]
    todo = [(i, cell, seed) for i, cell, seed in jobs if cell.key(seed) not in done]
    results = {}
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {cell.key(seed): pool.submit(_run_one, cell, seed) for _, cell, seed in todo}
            results = {k: f.result() for k, f in futures.items()}
    else:
        for _, cell, seed in todo:
            results[cell.key(seed)] = _run_one(cell, seed)
    rows = []
    for i, cell, seed in jobs:
        key = cell.key(seed)
        rows.append(dict(results[key]) if key in results else dict(done[key]))
    return rows, aggregate(rows, grid)


def aggregate(rows, grid):
    """Mean and sample standard deviation of every metric, one row per cell."""
    out = []
    for cell in grid:
        keys = {cell.key(s) for s in cell.seeds}
        mine = [r for r in rows if row_key(r) in keys]
        ok = [r for r in mine if not r.get("error")]
        agg = {**cell.label(), "config_fp": config_fingerprint(cell.config), "n_runs": len(mine),
               "n_failed": len(mine) - len(ok)}
        for c in METRIC_COLUMNS:
            vals = np.array([float(r[c]) for r in ok])
            agg[f"{c}_mean"] = float(vals.mean()) if len(vals) else float("nan")
            agg[f"{c}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0 if len(vals) else float("nan")
        out.append(agg)
    return out


def row_key(row):
    """Run key of a long-format row, matching :meth:`BenchCell.key`."""
    degree = float(row["degree"])
    noise = float(row.get("noise_std", 1.0))
    return "|".join([str(row["family"]), str(int(row["d"])), str(degree), str(row["mechanism"]), str(noise),
                     str(row["model"]), str(int(row["n"])), str(row["config_fp"]), str(int(row["seed"]))])


def completed_runs(rows):
    """Rows from a previous sweep that finished without error, keyed for :func:`run_benchmark`."""
    out = {}
    for r in rows:
        if r.get("error"):
            continue
        r = dict(r)
        for c in METRIC_COLUMNS:
            r[c] = float(r[c])
        for c in ("d", "n", "seed", "shd", "shd_rev", "shd_extra", "shd_miss"):
            r[c] = int(float(r[c]))
        r["degree"] = float(r["degree"])
        r["noise_std"] = float(r.get("noise_std", 1.0))
        out[row_key(r)] = r
    return out


_AXES = ("family", "d", "degree", "mechanism", "n", "noise_std", "model")


def grid_from_dict(spec: dict):
    """Build cells from a JSON-style grid.

    Either ``{"cells": [{...}, ...]}`` with one setting per cell, or axis
    lists such as ``{"family": ["ER", "SF"], "d": [10, 20], "seeds": [0, 1]}``
    expanded as a Cartesian product. ``config`` holds overrides applied on
    top of each model's defaults.
    """
    if "cells" in spec:
        cells = spec["cells"]
        if not isinstance(cells, list):
            raise ValidationError("'cells' must be a list")
        return [_cell(c) for c in cells]
    unknown = set(spec) - set(_AXES) - {"seeds", "config"}
    if unknown:
        raise ValidationError(f"unknown grid keys: {sorted(unknown)}")
    axes = {a: spec[a] if isinstance(spec.get(a), list) else [spec[a]] for a in _AXES if a in spec}
    names = list(axes)
    return [_cell({**dict(zip(names, combo)), "seeds": spec.get("seeds", [0]), "config": spec.get("config", {})})
            for combo in itertools.product(*(axes[a] for a in names))]


def _cell(c: dict) -> BenchCell:
    unknown = set(c) - set(_AXES) - {"seeds", "config"}
    if unknown:
        raise ValidationError(f"unknown cell keys: {sorted(unknown)}")
    model = c.get("model", "linear")
    graph = GraphSpec(d=int(c.get("d", 20)), family=str(c.get("family", "ER")),
                      expected_degree=float(c.get("degree", 4.0)))
    sem = SemSpec(mechanism=c.get("mechanism", "linear"), noise_std=float(c.get("noise_std", 1.0)),
                  n=int(c.get("n", 1000)))
    overrides = c.get("config") or {}
    base = default_config(model).to_dict()
    base.update(overrides)
    return BenchCell(graph, sem, model, TrainConfig.from_dict(base), tuple(c.get("seeds", [0])))
