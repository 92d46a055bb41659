"""Price panels, return scenarios and sample statistics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised when a price file or panel fails validation."""


@dataclass(frozen=True)
class PriceSeries:
    """``prices`` is assets-by-time (n x (T+1))."""

    asset_names: tuple[str, ...]
    dates: tuple
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2:
            raise DataError("prices must be a 2-D assets-by-time matrix")
        if prices.shape[0] != len(self.asset_names):
            raise DataError(f"{prices.shape[0]} price rows but {len(self.asset_names)} asset names")
        if prices.shape[1] != len(self.dates):
            raise DataError(f"{prices.shape[1]} price columns but {len(self.dates)} dates")
        if np.any(np.isnan(prices)):
            j, t = np.argwhere(np.isnan(prices))[0]
            raise DataError(f"missing value at ({self.asset_names[j]},{self.dates[t]})")
        if np.any(prices <= 0) or not np.all(np.isfinite(prices)):
            j, t = np.argwhere(~(prices > 0) | ~np.isfinite(prices))[0]
            raise DataError(f"non-positive price at ({self.asset_names[j]},{self.dates[t]})")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise DataError(f"dates must be strictly increasing ({a!r} then {b!r})")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)

    @property
    def n_assets(self) -> int:
        return self.prices.shape[0]


@dataclass(frozen=True)
class ReturnScenarioMatrix:
    """Simple returns, n assets x T equiprobable scenarios."""

    returns: np.ndarray
    asset_names: tuple[str, ...] = ()

    def __post_init__(self):
        r = np.array(self.returns, dtype=float, ndmin=2)
        if r.ndim != 2 or r.shape[1] == 0:
            raise DataError("returns must be an n x T matrix with T >= 1")
        if not np.all(np.isfinite(r)):
            raise DataError("returns must be finite")
        if np.any(r <= -1.0):
            raise DataError("returns must exceed -1")
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        if not self.asset_names:
            object.__setattr__(self, "asset_names", tuple(f"A{j + 1}" for j in range(r.shape[0])))

    @property
    def n_assets(self) -> int:
        return self.returns.shape[0]

    @property
    def n_scenarios(self) -> int:
        return self.returns.shape[1]

    @property
    def scenario_probability(self) -> float:
        return 1.0 / self.n_scenarios

    def subset(self, cols: Sequence[int] | slice) -> "ReturnScenarioMatrix":
        return ReturnScenarioMatrix(self.returns[:, cols], self.asset_names)


@dataclass(frozen=True)
class AssetStats:
    mu: np.ndarray
    cov: np.ndarray
    vol: np.ndarray
    corr: np.ndarray

    @property
    def n_assets(self) -> int:
        return self.mu.size


def _parse_date(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise DataError(f"unparseable date {text!r}") from exc


def load_prices(path) -> PriceSeries:
    """Read a date-by-asset price CSV (header ``date,<asset>,...``)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"price file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DataError("price file is empty")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise DataError("header must start with 'date' followed by asset names")
    assets = tuple(header[1:])
    if len(set(assets)) != len(assets):
        raise DataError("duplicate asset names in header")
    dates = []
    table = np.empty((len(assets), len(rows) - 1))
    for t, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise DataError(f"row {t + 2} has {len(row)} cells, expected {len(header)}")
        dates.append(_parse_date(row[0]))
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell == "" or cell.lower() in {"nan", "na", "null"}:
                raise DataError(f"missing value at ({assets[j]},{row[0].strip()})")
            try:
                val = float(cell)
            except ValueError as exc:
                raise DataError(f"non-numeric cell {cell!r} at ({assets[j]},{row[0].strip()})") from exc
            if math.isnan(val):
                raise DataError(f"missing value at ({assets[j]},{row[0].strip()})")
            if not val > 0:
                raise DataError(f"non-positive price {val} at ({assets[j]},{row[0].strip()})")
            table[j, t] = val
    return PriceSeries(assets, tuple(dates), table)


def write_prices(path, series: PriceSeries) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *series.asset_names])
        for t, d in enumerate(series.dates):
            w.writerow([d.isoformat() if isinstance(d, date) else d,
                        *(repr(float(p)) for p in series.prices[:, t])])


def compute_returns(p: PriceSeries) -> ReturnScenarioMatrix:
    P = p.prices
    if P.shape[1] < 2:
        raise DataError("at least two price columns are needed to form a return")
    return ReturnScenarioMatrix((P[:, 1:] - P[:, :-1]) / P[:, :-1], p.asset_names)


def compute_stats(r: ReturnScenarioMatrix) -> AssetStats:
    R = r.returns
    T = R.shape[1]
    if T < 2:
        raise DataError("at least two scenarios are needed for a covariance")
    mu = R.mean(axis=1)
    dev = R - mu[:, None]
    cov = dev @ dev.T / T
    cov = 0.5 * (cov + cov.T)
    vol = np.sqrt(np.maximum(np.diag(cov), 0.0))
    denom = np.outer(vol, vol)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 0, cov / np.where(denom > 0, denom, 1.0), 0.0)
    np.fill_diagonal(corr, 1.0)
    return AssetStats(mu=mu, cov=cov, vol=vol, corr=corr)


def market_portfolio_return(r: ReturnScenarioMatrix) -> float:
    """Average return of the equally weighted portfolio of all assets."""
    return float(r.returns.mean(axis=0).mean())


def portfolio_returns(r: ReturnScenarioMatrix | np.ndarray, x: np.ndarray) -> np.ndarray:
    R = r.returns if isinstance(r, ReturnScenarioMatrix) else np.asarray(r)
    return np.asarray(x, dtype=float) @ R
