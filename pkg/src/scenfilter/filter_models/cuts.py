"""Critical-set valid inequalities.

The return floor is rewritten with positive coefficients
a_jt = q (r_jt + alpha) and right-hand side beta = mu0 + alpha. A scenario
set S is critical when no (T-K)-subset of it reaches beta using the column
totals A_t = sum_j a_jt; every critical S yields the n inequalities
sum_{t in S} xt_jt <= T - K - 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import FilterInstance


@dataclass(frozen=True)
class CriticalCut:
    scenarios: tuple[int, ...]
    asset: int
    rhs: int


def floor_coefficients(inst: FilterInstance) -> tuple[np.ndarray, float]:
    r = inst.returns
    alpha = 1.0 + max(0.0, -float(r.min()), -inst.mu0)
    return inst.q * (r + alpha), inst.mu0 + alpha


def is_critical(S, inst: FilterInstance) -> bool:
    a, beta = floor_coefficients(inst)
    size = inst.T - inst.K
    S = list(S)
    if len(S) < size:
        return False
    totals = np.sort(a[:, S].sum(axis=0))[::-1]
    return float(totals[:size].sum()) < beta


def separate_critical_cuts(inst: FilterInstance) -> list[CriticalCut]:
    if inst.K < 1:
        raise ValueError("critical cuts need K >= 1")
    a, beta = floor_coefficients(inst)
    T, K = inst.T, inst.K
    size = T - K
    totals = a.sum(axis=0)
    order = np.argsort(totals, kind="stable")
    best = None
    for length in range(size, T + 1):
        S = order[:length]
        # top (T-K) within an ascending prefix are its last T-K entries
        if float(totals[S[-size:]].sum()) < beta:
            best = S
        else:
            break
    if best is None:
        return []
    scen = tuple(sorted(int(t) for t in best))
    return [CriticalCut(scen, j, size - 1) for j in range(inst.n)]
