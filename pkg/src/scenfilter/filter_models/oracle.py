"""Exhaustive enumeration of removal patterns, for verification."""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from .bnb import MipSolution, MipStatus, complete_solution
from .instance import FilterInstance, InfeasibleError, SolverError

MAX_SUBSETS = 10 ** 6


def _solve_subset(inst: FilterInstance, dropped: tuple[int, ...]):
    from scenfilter.heuristic import solve_r_mvo

    keep = [t for t in range(inst.T) if t not in dropped]
    try:
        _, fs = solve_r_mvo(inst.r, keep, inst.mu0)
    except (InfeasibleError, SolverError):
        return None
    return complete_solution(inst, fs.x, fs.z)


def brute_force_oracle(inst: FilterInstance, workers: Optional[int] = None) -> MipSolution:
    """Solve every K-subset removal with a plain QP and keep the best.

    Ties resolve to the lexicographically smallest subset, so the result does
    not depend on ``workers``.
    """
    count = math.comb(inst.T, inst.K)
    if count > MAX_SUBSETS:
        raise ValueError(f"C({inst.T},{inst.K}) = {count} exceeds the enumeration guard {MAX_SUBSETS}")
    t0 = time.perf_counter()
    subsets = list(itertools.combinations(range(inst.T), inst.K))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _solve_subset(inst, s), subsets))
    else:
        results = [_solve_subset(inst, s) for s in subsets]
    best = None
    for res in results:
        if res is not None and (best is None or res[3] < best[3]):
            best = res
    wall = time.perf_counter() - t0
    if best is None:
        return MipSolution(None, None, None, np.inf, np.inf, np.inf, count, wall,
                           MipStatus.INFEASIBLE)
    fs, xt, d, obj = best
    return MipSolution(fs, xt, d, obj, obj, 0.0, count, wall, MipStatus.OPTIMAL, [obj])
