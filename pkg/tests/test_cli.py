import json

import numpy as np
import pytest

from ddcd import io
from ddcd.cli import EXIT_NAN, EXIT_OK, EXIT_SWEEP, EXIT_USAGE, main


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch, tmp_path):
    monkeypatch.delenv("DDCD_SEED", raising=False)
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def fast_cfg(tmp_path):
    p = tmp_path / "fast.json"
    p.write_text(json.dumps({"n_iter": 60, "log_every": 20}))
    return str(p)


def _gen(out="data", *extra):
    argv = ["gen", "--d", "6", "--family", "er", "--degree", "2", "--n", "200", "--seed", "7", "--out-dir", out]
    return main(argv + list(extra))


def test_gen_writes_files_and_is_byte_identical(tmp_path):
    assert main(["gen", "--d", "20", "--family", "er", "--degree", "4", "--mech", "linear", "--n", "1000",
                 "--seed", "7", "--out-dir", "a"]) == EXIT_OK
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == ["X.csv", "X.json", "gt.tsv", "manifest_gen.json"]
    first = (tmp_path / "a" / "X.csv").read_bytes()
    assert main(["gen", "--d", "20", "--family", "er", "--degree", "4", "--mech", "linear", "--n", "1000",
                 "--seed", "7", "--out-dir", "a"]) == EXIT_OK
    assert (tmp_path / "a" / "X.csv").read_bytes() == first
    X, names = io.read_matrix_csv(tmp_path / "a" / "X.csv")
    assert X.shape == (1000, 20) and names[0] == "x0"
    lines = (tmp_path / "a" / "gt.tsv").read_text().splitlines()
    assert lines[:2] == ["# d=20", "source\ttarget\tweight"] and lines[2].startswith("x")
    assert io.read_adjacency_tsv(tmp_path / "a" / "gt.tsv").shape == (20, 20)


def test_gen_sidecar_records_mechanism(tmp_path):
    assert _gen("c", "--mech", "cos") == EXIT_OK
    assert io.read_json(tmp_path / "c" / "X.json")["mechanism"] == "cos"


def test_gen_bad_flags_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--d", "5", "--family", "tree"])
    assert exc.value.code == EXIT_USAGE
    assert main(["gen", "--d", "5", "--degree", "9"]) == EXIT_USAGE


def test_env_seed_overrides_flag(tmp_path, monkeypatch):
    _gen("a")
    monkeypatch.setenv("DDCD_SEED", "7")
    main(["gen", "--d", "6", "--family", "er", "--degree", "2", "--n", "200", "--seed", "99", "--out-dir", "b"])
    assert (tmp_path / "a" / "X.csv").read_bytes() == (tmp_path / "b" / "X.csv").read_bytes()
    assert io.read_json(tmp_path / "b" / "manifest_gen.json")["seed"] == 7


def test_fit_linear_dense_w(tmp_path, fast_cfg):
    _gen()
    assert main(["fit", "--model", "linear", "--data", "data/X.csv", "--config", fast_cfg, "--out", "fit/W.tsv"]) == 0
    W = io.read_adjacency_tsv(tmp_path / "fit" / "W.tsv")
    assert W.size == 36
    assert len((tmp_path / "fit" / "W.tsv").read_text().split()) == 36
    hist = io.read_rows_csv(tmp_path / "fit" / "history.csv")
    assert hist[-1]["iter"] == "59"
    m = io.read_json(tmp_path / "fit" / "manifest_fit.json")
    assert m["config"]["n_iter"] == 60 and m["inputs"] == ["data/X.csv", fast_cfg]


def test_fit_is_deterministic(tmp_path, fast_cfg):
    _gen()
    for out in ("r1/W.tsv", "r2/W.tsv"):
        main(["fit", "--data", "data/X.csv", "--config", fast_cfg, "--out", out])
    assert (tmp_path / "r1" / "W.tsv").read_bytes() == (tmp_path / "r2" / "W.tsv").read_bytes()


def test_fit_edge_list_matches_dense(tmp_path, fast_cfg):
    _gen()
    main(["fit", "--data", "data/X.csv", "--config", fast_cfg, "--out", "d/W.tsv"])
    main(["fit", "--data", "data/X.csv", "--config", fast_cfg, "--out", "e/W.tsv", "--edge-list"])
    assert (tmp_path / "e" / "W.tsv").read_text().startswith("# d=6\n")
    np.testing.assert_array_equal(io.read_adjacency_tsv(tmp_path / "d" / "W.tsv"),
                                  io.read_adjacency_tsv(tmp_path / "e" / "W.tsv"))


def test_fit_smooth_writes_curve(tmp_path, fast_cfg):
    _gen()
    assert main(["fit", "--model", "smooth", "--data", "data/X.csv", "--config", fast_cfg, "--out", "s/W.tsv"]) == 0
    rows = io.read_rows_csv(tmp_path / "s" / "W_curve.csv")
    assert len(rows) == 201 and set(rows[0]) == {"x", "y"}
    ys = [float(r["y"]) for r in rows]
    assert all(-1 < y < 1 for y in ys) and ys == sorted(ys)


def test_fit_nonlinear_writes_both_maps(tmp_path, fast_cfg):
    _gen()
    assert main(["fit", "--model", "nonlinear", "--data", "data/X.csv", "--config", fast_cfg,
                 "--out", "n/W.tsv", "--curve-range", "-1", "1", "11"]) == 0
    rows = io.read_rows_csv(tmp_path / "n" / "W_curve.csv")
    assert len(rows) == 11 and set(rows[0]) == {"x", "f1", "f2"}


def test_fit_ragged_csv_exit_2(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("1,2,3\n4,5,6\n7,8\n")
    assert main(["fit", "--data", "bad.csv"]) == EXIT_USAGE
    assert "bad.csv:3" in capsys.readouterr().err


def test_fit_missing_file_exit_2():
    assert main(["fit", "--data", "nope.csv"]) == EXIT_USAGE


def test_fit_bad_config_exit_2(tmp_path):
    _gen()
    (tmp_path / "c.json").write_text(json.dumps({"n_iterations": 5}))
    assert main(["fit", "--data", "data/X.csv", "--config", "c.json"]) == EXIT_USAGE


def test_fit_nan_exit_3(tmp_path, capsys):
    X = np.full((10, 3), 1e200)
    X[:, 1] *= -1
    io.write_matrix_csv(tmp_path / "huge.csv", X)
    with np.errstate(all="ignore"):
        assert main(["fit", "--data", "huge.csv"]) == EXIT_NAN
    err = capsys.readouterr().err
    assert "iteration" in err


def test_eval_prints_metrics(tmp_path, capsys):
    _gen()
    capsys.readouterr()
    assert main(["eval", "--pred", "data/gt.tsv", "--truth", "data/gt.tsv"]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["shd"] == 0 and rep["tpr"] == 1.0


def test_h_prints_decimal(tmp_path, capsys):
    io.write_adjacency_tsv(tmp_path / "c.tsv", np.array([[0.0, 1.0], [1.0, 0.0]]), edge_list=True)
    assert main(["h", "--input", "c.tsv", "--k", "3", "--exp"]) == EXIT_OK
    khop, hexp = (float(v) for v in capsys.readouterr().out.split())
    assert khop == pytest.approx(1 + 2 / 24, abs=1e-15)
    assert hexp == pytest.approx(1.086161, abs=1e-6)
    assert main(["h", "--input", "c.tsv", "--k", "0"]) == EXIT_USAGE


def test_config_prints_defaults(tmp_path, capsys, monkeypatch):
    assert main(["config", "--model", "smooth", "--default"]) == EXIT_OK
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["threshold"] == 0.1
    monkeypatch.setenv("DDCD_SEED", "11")
    main(["config", "--out", "c.json"])
    assert io.read_json(tmp_path / "c.json")["seed"] == 11


def _grid(tmp_path, **extra):
    spec = {"d": [4, 5], "degree": 2, "model": ["linear", "smooth"], "n": 100, "seeds": [0, 1, 2],
            "config": {"n_iter": 60, "log_every": 30}, **extra}
    (tmp_path / "grid.json").write_text(json.dumps(spec))
    return "grid.json"


def test_bench_rows_aggregate_and_resume(tmp_path):
    grid = _grid(tmp_path)
    assert main(["bench", "--grid", grid, "--out-dir", "b"]) == EXIT_OK
    rows = io.read_rows_csv(tmp_path / "b" / "results.csv")
    agg = io.read_rows_csv(tmp_path / "b" / "aggregate.csv")
    assert len(rows) == 12 and len(agg) == 4
    # drop the tail as if the sweep had been interrupted, then resume
    io.write_rows_csv(tmp_path / "b" / "results.csv", rows[:7], list(rows[0]))
    assert main(["bench", "--grid", grid, "--out-dir", "b", "--resume"]) == EXIT_OK
    again = io.read_rows_csv(tmp_path / "b" / "results.csv")
    assert [r["shd"] for r in again] == [r["shd"] for r in rows]
    assert [r["runtime_s"] for r in again[:7]] == [r["runtime_s"] for r in rows[:7]]
    assert io.read_json(tmp_path / "b" / "manifest_bench.json")["reused"] == 7


def test_bench_total_failure_exit_1(tmp_path, monkeypatch):
    import ddcd.evaluation as ev

    def boom(model, data, config):
        raise RuntimeError("diverged")
    monkeypatch.setattr(ev, "fit_model", boom)
    assert main(["bench", "--grid", _grid(tmp_path), "--out-dir", "f"]) == EXIT_SWEEP
    rows = io.read_rows_csv(tmp_path / "f" / "results.csv")
    assert len(rows) == 12 and all("diverged" in r["error"] for r in rows)


def test_bench_bad_grid_exit_2(tmp_path):
    (tmp_path / "g.json").write_text("[1, 2]")
    assert main(["bench", "--grid", "g.json"]) == EXIT_USAGE
    (tmp_path / "g.json").write_text("{not json")
    assert main(["bench", "--grid", "g.json"]) == EXIT_USAGE
