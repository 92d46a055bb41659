import csv
import json

import numpy as np
import pytest

from scenfilter.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main
from scenfilter.config import ConfigError, ExperimentConfig, load_config, parse_config
from scenfilter.market_data import PriceSeries, write_prices
from scenfilter.synthetic import SyntheticSpec, generate_prices


def price_file(tmp_path, returns, name="p.csv"):
    r = np.atleast_2d(np.asarray(returns, dtype=float))
    levels = np.concatenate([np.ones((r.shape[0], 1)), np.cumprod(1 + r, axis=1)], axis=1)
    names = tuple(f"S{j}" for j in range(r.shape[0]))
    path = tmp_path / name
    write_prices(path, PriceSeries(names, tuple(range(levels.shape[1])), levels))
    return str(path)


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if code == EXIT_OK else out


def test_config_round_trip():
    cfg = ExperimentConfig(methods=("markowitz", "heuristic-v2"), K_max=3, q=1.5,
                           use_cuts=True, workers=2)
    assert parse_config(cfg.dumps()) == cfg


def test_config_precedence(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text("schema_version = 1\nK_max = 2  # comment\np = 3\nq = 1.1\n")
    cfg = load_config(path, {"p": 4}, {"SCENFILTER_P": "7", "SCENFILTER_Q": "2.0"})
    assert (cfg.K_max, cfg.p, cfg.q) == (2, 4, 2.0)


@pytest.mark.parametrize("text, field", [
    ("K_max = 2\n", "schema_version"),
    ("schema_version = 1\nK_max = 40\n", "K_max"),
    ("schema_version = 1\nmethods = foo\n", "methods"),
    ("schema_version = 1\ntime_limit = 0\n", "time_limit"),
    ("schema_version = 1\nbogus = 1\n", "bogus"),
    ("schema_version = 1\np = x\n", "p"),
])
def test_config_errors(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text).validate()
    assert info.value.field == field


def test_cli_validation_exit(tmp_path, capsys):
    assert main(["backtest", "--K", "40", "--out-dir", str(tmp_path)]) == EXIT_VALIDATION
    assert "K_max" in capsys.readouterr().err
    assert main(["solve", "--method", "nope"]) == EXIT_VALIDATION
    assert main(["solve", "--data", str(tmp_path / "missing.csv")]) != EXIT_OK
    assert main(["nosuchcommand"]) == EXIT_VALIDATION


def test_solve_markowitz_two_assets(tmp_path, capsys):
    path = price_file(tmp_path, [[0.02, -0.01, 0.03, 0.0], [0.01, 0.0, 0.005, 0.01]])
    code, out = run_json(capsys, ["solve", "--data", path, "--method", "markowitz"])
    assert code == EXIT_OK
    assert sum(out["weights"]) == pytest.approx(1.0)
    assert out["status"] == "Optimal"


def test_solve_filter_drops_outlier(tmp_path, capsys):
    path = price_file(tmp_path, [0.01, 0.02, 0.03, 1.0])
    code, exact = run_json(capsys, ["solve", "--data", path, "--method", "filter-exact",
                                    "--K", "1", "--mu0", "0"])
    assert code == EXIT_OK
    assert exact["filtered"] == [3]
    code, h2 = run_json(capsys, ["solve", "--data", path, "--method", "heuristic-v2",
                                 "--K", "1", "--mu0", "0"])
    assert h2["objective"] == pytest.approx(exact["objective"], rel=1e-6)


def test_solve_infeasible_floor(tmp_path, capsys):
    path = price_file(tmp_path, [0.01, 0.02, 0.03, 0.04])
    assert main(["solve", "--data", path, "--method", "filter-exact", "--mu0", "1"]) == EXIT_RUNTIME


def test_verify_deterministic(capsys):
    argv = ["verify", "--n", "3", "--T", "8", "--K", "2", "--seeds", "2"]
    assert main(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out == first
    assert "2/2" in first


def test_gen_data(tmp_path, capsys):
    path = tmp_path / "g.csv"
    assert main(["gen-data", "--data", str(path), "--n-assets", "3", "--weeks", "10",
                 "--seed", "5"]) == EXIT_OK
    rows = list(csv.reader(open(path)))
    assert len(rows) == 12 and len(rows[0]) == 4
    path2 = tmp_path / "h.csv"
    main(["gen-data", "--data", str(path2), "--n-assets", "3", "--weeks", "10", "--seed", "5"])
    assert path.read_text() == path2.read_text()


def test_backtest_smoke(tmp_path, capsys):
    data = tmp_path / "d.csv"
    write_prices(data, generate_prices(SyntheticSpec(n_assets=3, n_weeks=30, seed=1)))
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("schema_version = 1\nin_sample_len = 16\nout_sample_len = 4\nstep = 4\n"
                   "methods = market,markowitz,filter-exact,heuristic-v2\n")
    out = tmp_path / "out"
    assert main(["backtest", "--config", str(cfg), "--data", str(data), "--K", "1",
                 "--out-dir", str(out), "--workers", "1"]) == EXIT_OK
    assert {p.name for p in out.iterdir()} == {"report.json", "metrics.csv", "values.csv",
                                               "config.cfg"}
    report = json.loads((out / "report.json").read_text())
    assert "heuristic-v2(K=1)" in report["methods"]
    assert parse_config((out / "config.cfg").read_text()).K_max == 1
    assert "Sharpe" in capsys.readouterr().out
