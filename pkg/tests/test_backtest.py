import csv
import json

import numpy as np
import pytest

from scenfilter.backtest import (
    BacktestParams,
    WindowResult,
    WindowScheme,
    compute_metrics,
    portfolio_value_series,
    roll_windows,
    run_backtest,
)
from scenfilter.market_data import ReturnScenarioMatrix
from scenfilter.synthetic import SyntheticSpec, generate_returns

SMALL = WindowScheme(16, 4, 4)


def wr(window, y, weights=(1.0,), **kw):
    return WindowResult(window, (1, 2), (3, 4), "m", np.asarray(weights, dtype=float), 0.0,
                        np.asarray(y, dtype=float), **kw)


def synthetic(n=4, T=28, seed=0):
    return ReturnScenarioMatrix(generate_returns(SyntheticSpec(n_assets=n, n_weeks=T, seed=seed)))


def test_windows_88():
    w = roll_windows(88)
    assert [o for _, o in w] == [(53, 64), (65, 76), (77, 88)]
    assert [i for i, _ in w] == [(1, 52), (13, 64), (25, 76)]


def test_windows_64_and_60():
    assert roll_windows(64) == [((1, 52), (53, 64))]
    assert roll_windows(60) == [((1, 52), (53, 60))]
    with pytest.raises(ValueError):
        roll_windows(52)


def test_windows_tile():
    for total in range(17, 60):
        w = roll_windows(total, SMALL)
        for (i0, i1), (o0, o1) in w:
            assert i1 < o0 <= o1 <= total
        outs = [o for _, o in w]
        for a, b in zip(outs, outs[1:]):
            assert a[1] < b[0]


def test_scheme_validation():
    with pytest.raises(ValueError):
        WindowScheme(52, 12, 0)
    with pytest.raises(ValueError):
        WindowScheme(1, 12, 12)


def test_metrics_fixture():
    m = compute_metrics([wr(0, [0.01, 0.03])])
    assert m.av_return == pytest.approx(0.02)
    assert np.sqrt(m.v_out) == pytest.approx(0.01)
    assert m.sharpe == pytest.approx(2.0)
    assert m.sharpe * np.sqrt(m.v_out) == pytest.approx(m.av_return, abs=1e-12)
    assert compute_metrics([wr(0, [0.0], (0.005, 0.495, 0.5))]).mean_assets == 2


def test_metrics_mre():
    exact = [wr(0, [0.0], objective=2.0), wr(1, [0.0], objective=4.0)]
    same = [wr(0, [0.0], objective=2.0), wr(1, [0.0], objective=4.0)]
    assert compute_metrics(same, exact).mre == 0.0
    better = [wr(0, [0.0], objective=1.0), wr(1, [0.0], objective=4.0)]
    # a heuristic beating a time-limited exact run gives a negative value, kept as is
    assert compute_metrics(better, exact).mre == pytest.approx(-25.0)


def test_metrics_errors_and_skips():
    with pytest.raises(ValueError):
        compute_metrics([])
    skipped = WindowResult(1, (1, 2), (3, 4), "m", None, 0.0, np.zeros(0), skipped=True)
    m = compute_metrics([wr(0, [0.01, 0.03]), skipped])
    assert m.n_windows == 2 and m.n_skipped == 1
    with pytest.raises(ValueError):
        compute_metrics([skipped])


def test_value_series():
    np.testing.assert_allclose(portfolio_value_series([wr(0, [0.1, -0.1])]), [1, 1.1, 0.99])
    np.testing.assert_array_equal(portfolio_value_series([wr(0, [0.0, 0.0])]), [1, 1, 1])
    vals = portfolio_value_series([wr(1, [0.2]), wr(0, [0.1])])
    assert vals[-1] == pytest.approx(1.32)


def test_market_method():
    r = synthetic()
    rep = run_backtest(r, ["market"], SMALL)
    for w in rep.results:
        np.testing.assert_array_equal(w.weights, 0.25)
        assert w.wall_time == 0.0
        np.testing.assert_allclose(w.out_returns, r.returns[:, w.out_range[0] - 1:w.out_range[1]].mean(axis=0))


def test_dominant_asset():
    rng = np.random.default_rng(3)
    T = 28
    R = rng.normal(0.0, 0.05, (4, T))
    R[0] = 0.01 + rng.normal(0.0, 1e-4, T)
    r = ReturnScenarioMatrix(R)
    rep = run_backtest(r, ["markowitz", "rmt", "power", "filter-exact", "heuristic-v1",
                           "heuristic-v2"], SMALL, BacktestParams(K_max=2, p=2))
    for w in rep.results:
        assert not w.skipped
        assert w.weights[0] == pytest.approx(1.0, abs=0.05)
    for m in rep.metrics.values():
        assert m.av_return == pytest.approx(0.01, abs=0.002)


def test_k0_matches_markowitz():
    r = synthetic(seed=1)
    rep = run_backtest(r, ["markowitz", "filter-exact"], SMALL, K_values=[0])
    a, b = rep.metrics["markowitz"], rep.metrics["filter-exact(K=0)"]
    for name in ("av_return", "v_out", "sharpe", "mean_assets"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), abs=1e-8)


def test_no_look_ahead():
    r = synthetic(seed=2)
    methods = ["markowitz", "rmt", "power", "filter-exact", "heuristic-v2"]
    params = BacktestParams(K_max=1, p=2)
    base = run_backtest(r, methods, SMALL, params)
    R = r.returns.copy()
    (i0, i1), (o0, o1) = roll_windows(r.n_scenarios, SMALL)[0]
    # disturb everything after the first in-sample block
    R[:, i1:] += np.random.default_rng(0).normal(0, 0.05, R[:, i1:].shape)
    pert = run_backtest(ReturnScenarioMatrix(R), methods, SMALL, params)
    for a, b in zip(base.by_method("markowitz"), pert.by_method("markowitz")):
        if a.window == 0:
            assert np.array_equal(a.weights, b.weights)
    for tag in base.methods:
        a, b = base.by_method(tag)[0], pert.by_method(tag)[0]
        assert np.array_equal(a.weights, b.weights), tag
        assert not np.array_equal(a.out_returns, b.out_returns)


def test_infeasible_windows_flagged():
    r = synthetic(seed=3)
    rep = run_backtest(r, ["markowitz", "heuristic-v2"], SMALL, BacktestParams(K_max=1, mu0=0.5))
    assert all(w.skipped and w.status == "Infeasible" for w in rep.results)
    assert rep.metrics == {}


def test_validation():
    r = synthetic()
    with pytest.raises(ValueError):
        run_backtest(r, [], SMALL)
    with pytest.raises(ValueError, match="unknown method"):
        run_backtest(r, ["nope"], SMALL)
    with pytest.raises(ValueError):
        run_backtest(r, ["rmt"], SMALL, BacktestParams(p=9))


def test_report_files(tmp_path):
    r = synthetic(seed=4)
    rep = run_backtest(r, ["market", "markowitz", "filter-exact", "heuristic-v1"], SMALL,
                       BacktestParams(K_max=1))
    rep.write_json(tmp_path / "r.json")
    rep.write_metrics_csv(tmp_path / "m.csv")
    rep.write_values_csv(tmp_path / "v.csv")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["methods"] == ["market", "markowitz", "filter-exact(K=1)", "heuristic-v1(K=1)"]
    rows = list(csv.DictReader(open(tmp_path / "m.csv")))
    assert [row["Method"] for row in rows] == doc["methods"]
    assert {"AvReturn", "V-Out", "Sharpe", "MeanAssets", "MeanTime", "MeanGap", "MRE"} <= set(rows[0])
    assert float(rows[3]["MRE"]) == pytest.approx(0.0, abs=1e-8)
    vals = list(csv.DictReader(open(tmp_path / "v.csv")))
    assert vals[0] == {"week": "0", "method": "market", "value": "1.0"}
    assert "Sharpe" in rep.metrics_table()


def test_deterministic_metrics():
    r = synthetic(seed=5)
    a = run_backtest(r, ["markowitz", "heuristic-v2"], SMALL, BacktestParams(K_max=1))
    b = run_backtest(r, ["heuristic-v2", "markowitz"], SMALL, BacktestParams(K_max=1, workers=2))
    for tag in a.methods:
        assert a.metrics[tag].av_return == b.metrics[tag].av_return
        assert a.metrics[tag].v_out == b.metrics[tag].v_out
