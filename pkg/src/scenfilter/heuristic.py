"""Nested scenario-filtering heuristic.

Both versions fix the removals chosen so far and add one more per step.
Version 1 solves the filtering MIQP with the earlier removals pinned;
version 2 sweeps plain mean-variance QPs over every single extra removal.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from scenfilter.filter_models.instance import (
    FilterInstance,
    FilterSolution,
    InfeasibleError,
    SolverError,
    make_solution,
    z_from_dropped,
)
from scenfilter.market_data import ReturnScenarioMatrix
from scenfilter.qp_core import QpSolution, QpStatus, QuadraticProgram, solve_qp

TIE_TOL = 1e-10
AUTO_V1_MAX_ASSETS = 50


def r_mvo_qp(R: np.ndarray, mu0: float) -> QuadraticProgram:
    """Mean-variance QP over the columns of ``R`` written with deviation variables."""
    n, m = R.shape
    p = 1.0 / m
    nv = n + m
    mean_coef = R.mean(axis=1)
    # d_t >= y_t - mean and d_t >= mean - y_t
    dev = R.T - mean_coef[None, :]
    A_in = np.zeros((2 * m + 1, nv))
    A_in[:m, :n] = -dev
    A_in[m:2 * m, :n] = dev
    A_in[np.arange(m), n + np.arange(m)] = 1.0
    A_in[m + np.arange(m), n + np.arange(m)] = 1.0
    A_in[2 * m, :n] = mean_coef
    b_in = np.zeros(2 * m + 1)
    b_in[-1] = mu0
    Q = np.zeros((nv, nv))
    Q[n + np.arange(m), n + np.arange(m)] = 2.0 * p
    A_eq = np.zeros((1, nv))
    A_eq[0, :n] = 1.0
    return QuadraticProgram.build(Q, np.zeros(nv), A_eq, [1.0], A_in, b_in, lower=np.zeros(nv))


def solve_r_mvo(r: ReturnScenarioMatrix, keep: Sequence[int], mu0: float
                ) -> tuple[QpSolution, FilterSolution]:
    """Mean-variance portfolio using only the kept scenarios, each with weight 1/|keep|.

    Raises InfeasibleError when the floor cannot be met on ``keep``.
    """
    keep = sorted(int(t) for t in keep)
    if len(keep) < 2:
        raise ValueError("R-MVO needs at least two kept scenarios")
    if len(set(keep)) != len(keep):
        raise ValueError("kept scenarios must be distinct")
    R = r.returns[:, keep]
    sol = solve_qp(r_mvo_qp(R, mu0))
    if sol.status is QpStatus.INFEASIBLE:
        raise InfeasibleError(f"floor {mu0:.6g} unattainable on {len(keep)} kept scenarios")
    if not sol.optimal:
        raise SolverError(f"R-MVO {sol.status.value}: {sol.message}")
    T = r.n_scenarios
    dropped = sorted(set(range(T)) - set(keep))
    inst = FilterInstance(r, len(dropped), mu0)
    x = np.maximum(sol.v[:r.n_assets], 0.0)
    x = x / x.sum()
    return sol, make_solution(x, z_from_dropped(dropped, T), inst)


@dataclass
class HeuristicStep:
    k: int
    scenario: int
    objective: float
    wall_time: float
    n_solves: int = 0
    solution: Optional[FilterSolution] = field(default=None, repr=False, compare=False)


@dataclass
class HeuristicTrace:
    version: str
    steps: list[HeuristicStep]
    solution: Optional[FilterSolution]
    wall_time: float = 0.0

    @property
    def objective(self) -> float:
        return self.steps[-1].objective if self.steps else float("nan")

    @property
    def chosen(self) -> list[int]:
        return [s.scenario for s in self.steps]

    def to_dict(self) -> dict:
        sol = self.solution
        return {
            "version": self.version,
            "objective": self.objective,
            "wall_time": self.wall_time,
            "steps": [dict(k=s.k, scenario=s.scenario, objective=s.objective,
                           wall_time=s.wall_time, n_solves=s.n_solves) for s in self.steps],
            "weights": sol.x.tolist() if sol is not None else None,
            "filtered": sol.filtered if sol is not None else None,
            "filtered_mean": sol.filtered_mean if sol is not None else None,
            "filtered_variance": sol.filtered_variance if sol is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class StepInfeasible(InfeasibleError):
    def __init__(self, step: int, msg: str):
        super().__init__(f"step {step}: {msg}")
        self.step = step


def heuristic_v1(inst: FilterInstance, *, time_limit: float = 7200.0,
                 use_cuts: bool = False) -> HeuristicTrace:
    """Pin earlier removals and solve the MIQP for one more at each step."""
    from scenfilter.filter_models.bnb import BnbOptions, MipStatus, solve_branch_and_bound

    if inst.K < 1:
        raise ValueError("the heuristic needs K >= 1")
    t_start = time.perf_counter()
    chosen: list[int] = []
    steps = []
    sol = None
    for k in range(1, inst.K + 1):
        t0 = time.perf_counter()
        sub = inst.with_K(k)
        res = solve_branch_and_bound(sub, BnbOptions(time_limit=time_limit, use_cuts=use_cuts),
                                     fixed_one=chosen)
        if res.status is MipStatus.INFEASIBLE or res.best is None:
            raise StepInfeasible(k, "floor unattainable after the earlier removals")
        new = [t for t in res.best.filtered if t not in chosen]
        if len(new) != 1:
            raise SolverError(f"step {k}: expected one new removal, got {new}")
        chosen.append(new[0])
        sol = res.best
        steps.append(HeuristicStep(k, new[0], res.objective, time.perf_counter() - t0, res.nodes,
                                   sol))
    return HeuristicTrace("v1", steps, sol, time.perf_counter() - t_start)


def _sweep(r: ReturnScenarioMatrix, kept: list[int], mu0: float):
    best = None
    n_solves = 0
    for t in kept:
        n_solves += 1
        try:
            _, fs = solve_r_mvo(r, [s for s in kept if s != t], mu0)
        except InfeasibleError:
            continue
        obj = fs.filtered_variance
        # ascending sweep: a later index wins only by more than the tie tolerance
        if best is None or obj < best[0] - TIE_TOL:
            best = (obj, t, fs)
    return best, n_solves


def heuristic_v2(inst: FilterInstance) -> HeuristicTrace:
    """Sweep every single extra removal with plain mean-variance QPs."""
    if inst.K < 1:
        raise ValueError("the heuristic needs K >= 1")
    t_start = time.perf_counter()
    kept = list(range(inst.T))
    steps = []
    sol = None
    for k in range(1, inst.K + 1):
        t0 = time.perf_counter()
        best, n_solves = _sweep(inst.r, kept, inst.mu0)
        if best is None:
            raise StepInfeasible(k, "no single removal keeps the floor attainable")
        obj, t, sol = best
        kept.remove(t)
        steps.append(HeuristicStep(k, t, obj, time.perf_counter() - t0, n_solves, sol))
    return HeuristicTrace("v2", steps, sol, time.perf_counter() - t_start)


def run_heuristic(inst: FilterInstance, version: str = "auto", **kw) -> HeuristicTrace:
    if version == "auto":
        version = "v1" if inst.n <= AUTO_V1_MAX_ASSETS else "v2"
    if version == "v1":
        return heuristic_v1(inst, **kw)
    if version == "v2":
        return heuristic_v2(inst)
    raise ValueError(f"unknown heuristic version {version!r}")
