import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scenfilter.market_data import (
    DataError,
    PriceSeries,
    ReturnScenarioMatrix,
    compute_returns,
    compute_stats,
    load_prices,
    market_portfolio_return,
    write_prices,
)


def write(tmp_path, text):
    p = tmp_path / "prices.csv"
    p.write_text(text)
    return p


def test_load_minimal(tmp_path):
    ps = load_prices(write(tmp_path, "date,A,B\n1,10,20\n2,11,19\n"))
    assert ps.n_assets == 2
    assert len(ps.dates) == 2
    assert ps.prices.shape == (2, 2)


def test_load_iso_dates(tmp_path):
    ps = load_prices(write(tmp_path, "date,A\n2020-01-03,1\n2020-01-10,2\n"))
    assert ps.dates[0] < ps.dates[1]


@pytest.mark.parametrize("cell", ["NaN", "nan", ""])
def test_missing_value(tmp_path, cell):
    with pytest.raises(DataError, match=r"missing value at \(B,2\)"):
        load_prices(write(tmp_path, f"date,A,B\n1,1,1\n2,1,{cell}\n"))


def test_nonpositive_price(tmp_path):
    with pytest.raises(DataError, match="non-positive price"):
        load_prices(write(tmp_path, "date,A\n1,1\n2,0.0\n"))


def test_bad_dates_and_cells(tmp_path):
    with pytest.raises(DataError, match="strictly increasing"):
        load_prices(write(tmp_path, "date,A\n2,1\n1,2\n"))
    with pytest.raises(DataError, match="non-numeric"):
        load_prices(write(tmp_path, "date,A\n1,1\n2,abc\n"))
    with pytest.raises(DataError, match="not found"):
        load_prices(tmp_path / "nope.csv")


def test_roundtrip(tmp_path):
    ps = PriceSeries(("X", "Y"), (1, 2, 3), np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.5]]))
    write_prices(tmp_path / "p.csv", ps)
    back = load_prices(tmp_path / "p.csv")
    assert back.asset_names == ps.asset_names
    np.testing.assert_array_equal(back.prices, ps.prices)


@pytest.mark.parametrize("prices,expected", [
    ([100, 110, 99], [0.10, -0.10]),
    ([5, 5, 5], [0.0, 0.0]),
    ([1, 2, 1], [1.0, -0.5]),
])
def test_compute_returns(prices, expected):
    ps = PriceSeries(("A",), tuple(range(len(prices))), np.array([prices], dtype=float))
    np.testing.assert_allclose(compute_returns(ps).returns[0], expected, atol=1e-15)


def test_returns_need_two_prices():
    with pytest.raises(DataError):
        compute_returns(PriceSeries(("A",), (1,), np.array([[1.0]])))


def test_scenario_probability():
    r = ReturnScenarioMatrix(np.zeros((2, 7)))
    assert r.scenario_probability * 7 == 1.0


def test_stats_examples():
    s = compute_stats(ReturnScenarioMatrix([[1.0, 2.0, 3.0]]))
    assert s.mu[0] == pytest.approx(2.0)
    assert s.cov[0, 0] == pytest.approx(2 / 3)
    s = compute_stats(ReturnScenarioMatrix([[0.1, 0.2, 0.4], [0.1, 0.2, 0.4]]))
    np.testing.assert_allclose(s.corr, np.ones((2, 2)))
    # a return of exactly -1 is not admissible, so the anti-symmetric case is halved
    s = compute_stats(ReturnScenarioMatrix([[0.5, -0.5], [-0.5, 0.5]]))
    np.testing.assert_allclose(s.cov, [[0.25, -0.25], [-0.25, 0.25]])
    assert s.corr[0, 1] == pytest.approx(-1.0)


def test_zero_vol_correlation():
    s = compute_stats(ReturnScenarioMatrix([[0.0, 0.0, 0.0], [0.1, 0.2, 0.3]]))
    assert s.corr[0, 1] == 0.0
    assert s.corr[0, 0] == 1.0


def test_market_return():
    assert market_portfolio_return(ReturnScenarioMatrix([[0.1, 0.3], [0.3, 0.1]])) == pytest.approx(0.2)
    assert market_portfolio_return(ReturnScenarioMatrix([[0.1, 0.2, 0.6]])) == pytest.approx(0.3)
    assert market_portfolio_return(ReturnScenarioMatrix(np.zeros((3, 4)))) == 0.0


def test_returns_above_minus_one():
    with pytest.raises(DataError):
        ReturnScenarioMatrix([[-1.0, 0.1]])


returns_st = arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(2, 12)),
                    elements=st.floats(-0.5, 0.5))


@given(returns_st)
def test_cov_reconstruction(R):
    s = compute_stats(ReturnScenarioMatrix(R))
    np.testing.assert_allclose(s.cov, s.cov.T, atol=1e-12)
    live = s.vol > 1e-8
    rebuilt = np.outer(s.vol, s.vol) * s.corr
    np.testing.assert_allclose(rebuilt[np.ix_(live, live)], s.cov[np.ix_(live, live)],
                               rtol=1e-10, atol=1e-18)


@given(returns_st, st.randoms())
def test_stats_permute(R, rnd):
    perm = list(range(R.shape[0]))
    rnd.shuffle(perm)
    a = compute_stats(ReturnScenarioMatrix(R))
    b = compute_stats(ReturnScenarioMatrix(R[perm]))
    np.testing.assert_allclose(b.mu, a.mu[perm], atol=1e-15)
    np.testing.assert_allclose(b.cov, a.cov[np.ix_(perm, perm)], atol=1e-15)


@given(arrays(np.float64, st.integers(2, 10), elements=st.floats(0.1, 100.0)),
       st.floats(0.01, 100.0))
def test_returns_scale_invariant(p, c):
    a = compute_returns(PriceSeries(("A",), tuple(range(p.size)), p[None, :]))
    b = compute_returns(PriceSeries(("A",), tuple(range(p.size)), c * p[None, :]))
    np.testing.assert_allclose(a.returns, b.returns, rtol=1e-14, atol=1e-15)
