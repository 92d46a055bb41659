"""Tight big-M constants for the deviation rows of the filtering MIQP.

For a dropped scenario t' the deviation y_t'(x) - mu~(x, z) has to be
dominated by M+_t', and its negative by M-_t'. Both maxima are attained at
a vertex x = e_j of the simplex and at the removal pattern that pushes the
filtered mean of asset j furthest, which reduces to order statistics:

    M+_t' = max_j { r_jt' - q * sum_{t != t'} r_jt + B-_jt' }
    M-_t' = max_j { -r_jt' + q * sum_{t != t'} r_jt + B+_jt' }

where B+_jt' (B-_jt') is the sum of the K-1 greatest values of
{-q r_jt} ({q r_jt}) over t != t'.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import FilterInstance


@dataclass(frozen=True)
class BigMBounds:
    m_plus: np.ndarray
    m_minus: np.ndarray
    b_plus: np.ndarray
    b_minus: np.ndarray

    def scaled(self, factor: float) -> "BigMBounds":
        return BigMBounds(self.m_plus * factor, self.m_minus * factor, self.b_plus, self.b_minus)


def _top_sum_excluding(vals: np.ndarray, k: int) -> np.ndarray:
    """out[j, t'] = sum of the k greatest of vals[j, t] over t != t'."""
    n, T = vals.shape
    out = np.zeros((n, T))
    if k == 0:
        return out
    order = np.argsort(-vals, axis=1, kind="stable")
    srt = np.take_along_axis(vals, order, axis=1)
    top_k = srt[:, :k].sum(axis=1)
    top_k1 = srt[:, :k + 1].sum(axis=1)
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(T)[None, :].repeat(n, axis=0), axis=1)
    # removing an element inside the top k pulls the (k+1)-th one in
    inside = rank < k
    out[:] = top_k[:, None]
    out[inside] = (top_k1[:, None] - vals)[inside]
    return out


def compute_big_m(inst: FilterInstance) -> BigMBounds:
    if inst.K < 1:
        raise ValueError("big-M constants are only defined for K >= 1")
    r = inst.returns
    q = inst.q
    k = inst.K - 1
    b_plus = _top_sum_excluding(-q * r, k)
    b_minus = _top_sum_excluding(q * r, k)
    rest = q * (r.sum(axis=1, keepdims=True) - r)
    m_plus = np.max(r - rest + b_minus, axis=0)
    m_minus = np.max(-r + rest + b_plus, axis=0)
    return BigMBounds(np.maximum(m_plus, 0.0), np.maximum(m_minus, 0.0), b_plus, b_minus)


def sample_bigm_excess(inst: FilterInstance, bounds: BigMBounds, n_samples: int = 1000,
                       seed: int = 0, max_tries: int = 100) -> tuple[float, int]:
    """Largest amount by which a sampled feasible point beats the big-M bounds.

    Draws (x, z) with x on the simplex (Dirichlet mixed with vertices), K
    random removals and the filtered mean at or above the floor, then checks
    y_t' - mean <= M+_t' and mean - y_t' <= M-_t' for every removed t'.
    Returns (max excess, number of feasible samples); a valid bound gives an
    excess <= 0.
    """
    rng = np.random.default_rng(seed)
    n, T, K, q = inst.n, inst.T, inst.K, inst.q
    r = inst.returns
    worst = -np.inf
    got = 0
    for _ in range(max_tries * n_samples):
        if got >= n_samples:
            break
        if rng.random() < 0.2:
            x = np.zeros(n)
            x[rng.integers(n)] = 1.0
        else:
            x = rng.dirichlet(np.full(n, 0.5))
        drop = rng.choice(T, K, replace=False)
        keep = np.ones(T, dtype=bool)
        keep[drop] = False
        y = x @ r
        mean = q * y[keep].sum()
        if mean < inst.mu0:
            continue
        got += 1
        worst = max(worst, float(np.max(y[drop] - mean - bounds.m_plus[drop])),
                    float(np.max(mean - y[drop] - bounds.m_minus[drop])))
    return worst, got
