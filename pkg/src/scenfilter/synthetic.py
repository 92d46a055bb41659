"""Seeded synthetic weekly price panels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scenfilter.market_data import PriceSeries


@dataclass(frozen=True)
class SyntheticSpec:
    n_assets: int = 10
    n_weeks: int = 120  # number of weekly returns; prices have one more column
    seed: int = 0
    market_drift: float = 0.0015
    market_vol: float = 0.02
    idio_vol: float = 0.015
    jump_prob: float = 0.02  # chance per week of a market-wide shock
    jump_size: float = 0.08


def generate_returns(spec: SyntheticSpec) -> np.ndarray:
    """One-factor model with occasional common shocks, shape (n_assets, n_weeks)."""
    rng = np.random.default_rng(spec.seed)
    n, T = spec.n_assets, spec.n_weeks
    beta = rng.uniform(0.5, 1.5, n)
    alpha = rng.normal(0.0, 0.0005, n)
    vol = spec.idio_vol * rng.uniform(0.5, 1.5, n)
    f = spec.market_drift + spec.market_vol * rng.standard_normal(T)
    shocks = rng.random(T) < spec.jump_prob
    f[shocks] -= spec.jump_size * rng.uniform(0.5, 1.5, shocks.sum())
    r = alpha[:, None] + beta[:, None] * f[None, :] + vol[:, None] * rng.standard_normal((n, T))
    return np.maximum(r, -0.9)


def generate_prices(spec: SyntheticSpec = SyntheticSpec()) -> PriceSeries:
    r = generate_returns(spec)
    levels = 100.0 * np.concatenate([np.ones((spec.n_assets, 1)),
                                     np.cumprod(1.0 + r, axis=1)], axis=1)
    names = tuple(f"A{j + 1:02d}" for j in range(spec.n_assets))
    return PriceSeries(names, tuple(range(spec.n_weeks + 1)), levels)
