"""``ddcd`` command line: gen, fit, eval, bench, h, config.

Exit codes: 0 ok, 1 every benchmark run failed, 2 usage or input error,
3 numerical abort (non-finite loss).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .acyclicity import h_exponential, h_khop
from .evaluation import (LONG_COLUMNS, compute_metrics, completed_runs, grid_from_dict, run_benchmark,
                         threshold_edges)
from .exceptions import NumericalError, ValidationError
from .graph_synth import FAMILIES, MECHANISMS, GraphSpec, SemSpec, gen_dag, simulate_sem
from .optimizer import MODELS, TrainConfig, default_config

EXIT_OK, EXIT_SWEEP, EXIT_USAGE, EXIT_NAN = 0, 1, 2, 3
SEED_ENV = "DDCD_SEED"

log = logging.getLogger("ddcd")


def env_seed(default):
    value = os.environ.get(SEED_ENV)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {value!r}") from None


def load_config(model, path=None):
    """Model defaults, overlaid with the JSON file at ``path`` and then ``DDCD_SEED``."""
    base = default_config(model).to_dict()
    if path is not None:
        overrides = io.read_json(path)
        if not isinstance(overrides, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        base.update(overrides)
    cfg = TrainConfig.from_dict(base)
    return cfg.replace(seed=env_seed(cfg.seed))


def _manifest(out_dir, command, args, config=None, seed=None, inputs=(), outputs=(), started=None, extra=None):
    path = Path(out_dir) / f"manifest_{command}.json"
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    io.write_manifest(path, {"subcommand": command, "argv": sys.argv[1:], "args": flags}, config, seed,
                      inputs, outputs, started, extra=extra)
    return path


# ---------------------------------------------------------------- commands


def cmd_gen(args):
    started = time.time()
    seed = env_seed(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph = GraphSpec(d=args.d, family=args.family, expected_degree=args.degree, seed=seed)
    sem = SemSpec(mechanism=args.mech, noise_std=args.noise_std, n=args.n)
    gt = gen_dag(graph)
    data = simulate_sem(gt, sem, seed=[seed, 7])
    x_path, gt_path, meta_path = out / "X.csv", out / "gt.tsv", out / "X.json"
    io.write_matrix_csv(x_path, data.X, data.names())
    io.write_adjacency_tsv(gt_path, gt.adjacency, edge_list=True, names=data.names())
    io.write_json(meta_path, {"d": args.d, "family": graph.family, "degree": args.degree, "seed": seed,
                              "mechanism": args.mech, "noise_std": args.noise_std, "n": args.n,
                              "topological_order": gt.topological_order})
    _manifest(out, "gen", args, seed=seed, outputs=[x_path, gt_path, meta_path], started=started)
    print(f"wrote {x_path}, {gt_path}, {meta_path}")
    return EXIT_OK


def cmd_fit(args):
    from .linear_model import fit_linear
    from .neural_models import fit_nonlinear, fit_smooth

    started = time.time()
    cfg = load_config(args.model, args.config)
    X, names = io.read_matrix_csv(args.data)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    outputs = [out]
    lo, hi, num = args.curve_range
    curve_path = Path(args.curve) if args.curve else out.with_name(out.stem + "_curve.csv")

    if args.model == "linear":
        W, history = fit_linear(X, cfg)
    elif args.model == "nonlinear":
        W, f1, f2, history = fit_nonlinear(X, cfg)
        x = np.linspace(lo, hi, int(num))
        io.write_rows_csv(curve_path, [{"x": a, "f1": b, "f2": c} for a, b, c in zip(x, f1(x), f2(x))],
                          ["x", "f1", "f2"])
        outputs.append(curve_path)
    else:
        W, model, history = fit_smooth(X, cfg)
        x, y = model.normalizer.sample_curve(lo, hi, int(num))
        io.write_curve_csv(curve_path, x, y)
        outputs.append(curve_path)

    io.write_adjacency_tsv(out, W, edge_list=args.edge_list, names=names)
    history_path = Path(args.history) if args.history else out.with_name("history.csv")
    io.write_rows_csv(history_path, history)
    outputs.append(history_path)
    _manifest(out.parent, "fit", args, cfg.to_dict(), cfg.seed, [args.data] + ([args.config] if args.config else []),
              outputs, started, extra={"final": history[-1] if history else None})
    print(f"wrote {', '.join(str(p) for p in outputs)}")
    return EXIT_OK


def cmd_eval(args):
    pred = io.read_adjacency_tsv(args.pred)
    truth = io.read_adjacency_tsv(args.truth)
    rep = compute_metrics(threshold_edges(pred, args.omega), threshold_edges(truth, 0.0))
    print(json.dumps(rep.to_dict(), indent=2))
    return EXIT_OK


def cmd_bench(args):
    started = time.time()
    spec = io.read_json(args.grid)
    if not isinstance(spec, dict):
        raise ValidationError(f"{args.grid}: grid must be a JSON object")
    seed_override = os.environ.get(SEED_ENV)
    if seed_override:
        spec = {**spec, "seeds": [env_seed(0)]}
        if "cells" in spec:
            spec["cells"] = [{**c, "seeds": [env_seed(0)]} for c in spec["cells"]]
    grid = grid_from_dict(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    long_path, agg_path = out / "results.csv", out / "aggregate.csv"

    done = {}
    if args.resume and long_path.is_file():
        done = completed_runs(io.read_rows_csv(long_path))
        log.info("resuming: %d completed runs found", len(done))
    rows, agg = run_benchmark(grid, done=done, workers=args.workers)
    io.write_rows_csv(long_path, rows, LONG_COLUMNS)
    io.write_rows_csv(agg_path, agg)
    failed = sum(1 for r in rows if r.get("error"))
    _manifest(out, "bench", args, spec, None, [args.grid], [long_path, agg_path], started,
              extra={"runs": len(rows), "failed": failed, "reused": len(done)})
    print(f"{len(rows)} runs, {failed} failed; wrote {long_path}, {agg_path}")
    return EXIT_SWEEP if rows and failed == len(rows) else EXIT_OK


def cmd_h(args):
    W = io.read_adjacency_tsv(args.input)
    d = W.shape[0]
    k = d if args.k is None else args.k
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    print(io.fmt(h_khop(W, k, args.gamma, with_grad=False).value))
    if args.exp:
        print(io.fmt(h_exponential(W, with_grad=False).value))
    return EXIT_OK


def cmd_config(args):
    cfg = default_config(args.model)
    cfg = cfg.replace(seed=env_seed(cfg.seed))
    text = cfg.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser():
    p = argparse.ArgumentParser(prog="ddcd", description="Denoising-diffusion causal discovery toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a ground-truth DAG and SEM data")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--family", type=str.upper, choices=FAMILIES, default="ER")
    g.add_argument("--degree", type=float, default=4.0, help="expected degree (ER) or attachment count (SF)")
    g.add_argument("--mech", choices=MECHANISMS, default="linear")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--noise-std", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", default=".")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="fit a model to a data CSV")
    f.add_argument("--model", choices=MODELS, default="linear")
    f.add_argument("--data", required=True)
    f.add_argument("--config", help="JSON of TrainConfig fields overriding the model defaults")
    f.add_argument("--out", default="W.tsv")
    f.add_argument("--history", help="history CSV path (default: history.csv beside --out)")
    f.add_argument("--edge-list", action="store_true", help="write W as an edge list instead of a dense matrix")
    f.add_argument("--curve", help="sampled scalar-map CSV (nonlinear and smooth models)")
    f.add_argument("--curve-range", nargs=3, type=float, default=(-3.0, 3.0, 201), metavar=("LO", "HI", "NUM"))
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="score a fitted W against the ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--omega", type=float, default=0.3)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="run a benchmark grid")
    b.add_argument("--grid", required=True)
    b.add_argument("--out-dir", default=".")
    b.add_argument("--resume", action="store_true", help="reuse finished runs from an existing results.csv")
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=cmd_bench)

    h = sub.add_parser("h", help="evaluate the k-hop acyclicity score of a W")
    h.add_argument("--input", required=True)
    h.add_argument("--k", type=int, default=None, help="hop count; defaults to d")
    h.add_argument("--gamma", type=float, default=1.0)
    h.add_argument("--exp", action="store_true", help="also print the matrix-exponential score on a second line")
    h.set_defaults(func=cmd_h)

    c = sub.add_parser("config", help="print a model's default training config")
    c.add_argument("--model", choices=MODELS, default="linear")
    c.add_argument("--default", action="store_true", help="print the defaults (the only mode)")
    c.add_argument("--out")
    c.set_defaults(func=cmd_config)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps(exc.diagnostics), file=sys.stderr)
        return EXIT_NAN
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
