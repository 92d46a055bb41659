"""Best-first branch-and-bound over the scenario-removal binaries."""
from __future__ import annotations

import enum
import heapq
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from scenfilter.qp_core import QpStatus, solve_qp

from .bigm import compute_big_m
from .cuts import separate_critical_cuts
from .instance import FilterInstance, FilterSolution, InfeasibleError, SolverError, make_solution
from .model import MiqpModel, build_miqp

logger = logging.getLogger(__name__)

INT_TOL = 1e-6
FATHOM_TOL = 1e-9


class MipStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    TIME_LIMIT = "TimeLimit"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class BnbOptions:
    time_limit: float = 7200.0
    use_cuts: bool = False
    gap_tol: float = 0.0
    bigm_scale: float = 1.0
    rounding: bool = True


@dataclass
class MipSolution:
    best: Optional[FilterSolution]
    xt: Optional[np.ndarray]
    d: Optional[np.ndarray]
    objective: float
    dual_bound: float
    gap_percent: float
    nodes: int
    wall_time: float
    status: MipStatus
    incumbents: list = field(default_factory=list)
    n_cuts: int = 0

    def to_dict(self) -> dict:
        b = self.best
        return {
            "status": self.status.value,
            "weights": b.x.tolist() if b is not None else None,
            "filtered": b.filtered if b is not None else None,
            "filtered_mean": b.filtered_mean if b is not None else None,
            "objective": _num(self.objective),
            "bound": _num(self.dual_bound),
            "gap_percent": _num(self.gap_percent),
            "nodes": self.nodes,
            "wall_time": self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _num(x: float):
    return None if x is None or not np.isfinite(x) else float(x)


def gap_percent(objective: float, bound: float) -> float:
    return 100.0 * (objective - bound) / max(abs(objective), 1e-12)


def complete_solution(inst: FilterInstance, x: np.ndarray, z: np.ndarray
                      ) -> tuple[FilterSolution, np.ndarray, np.ndarray, float]:
    """Exact model point for an integral (x, z): xt = x(1-z), d = kept |y - mean|."""
    fs = make_solution(x, z, inst)
    keep = 1 - fs.z
    xt = np.outer(fs.x, keep)
    y = fs.x @ inst.returns
    d = np.abs(y - fs.filtered_mean) * keep
    obj = float(np.sum(inst.q * d ** 2))
    return fs, xt, d, obj


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixed0: frozenset = field(compare=False)
    fixed1: frozenset = field(compare=False)


def _markowitz_mip(inst: FilterInstance, t0: float) -> MipSolution:
    from scenfilter.baselines import solve_markowitz
    from scenfilter.market_data import compute_stats

    try:
        sol = solve_markowitz(compute_stats(inst.r), inst.mu0)
    except InfeasibleError:
        return MipSolution(None, None, None, np.inf, np.inf, np.inf, 0,
                           time.perf_counter() - t0, MipStatus.INFEASIBLE)
    x = np.maximum(sol.v, 0.0)
    x /= x.sum()
    fs, xt, d, obj = complete_solution(inst, x, np.zeros(inst.T, dtype=int))
    return MipSolution(fs, xt, d, obj, obj, 0.0, 1, time.perf_counter() - t0,
                       MipStatus.OPTIMAL, [obj])


def solve_branch_and_bound(inst: FilterInstance, options: BnbOptions = BnbOptions(), *,
                           fixed_one: Iterable[int] = (), model: Optional[MiqpModel] = None
                           ) -> MipSolution:
    """Solve the filtering MIQP exactly (or until ``options.time_limit``).

    ``fixed_one`` pins scenarios as removed before the search starts.
    """
    from scenfilter.heuristic import solve_r_mvo

    t0 = time.perf_counter()
    T, K = inst.T, inst.K
    fixed_one = frozenset(int(t) for t in fixed_one)
    if len(fixed_one) > K:
        raise ValueError("more pinned removals than K")
    if K == 0:
        return _markowitz_mip(inst, t0)

    n_cuts = 0
    if model is None:
        cuts = separate_critical_cuts(inst) if options.use_cuts else []
        n_cuts = len(cuts)
        model = build_miqp(inst, compute_big_m(inst), cuts, bigm_scale=options.bigm_scale)

    rmvo_cache: dict[frozenset, Optional[tuple]] = {}

    def evaluate(dropped: frozenset):
        if dropped not in rmvo_cache:
            keep = [t for t in range(T) if t not in dropped]
            try:
                _, fs = solve_r_mvo(inst.r, keep, inst.mu0)
                rmvo_cache[dropped] = complete_solution(inst, fs.x, fs.z)
            except (InfeasibleError, SolverError):
                rmvo_cache[dropped] = None
        return rmvo_cache[dropped]

    incumbent = None
    inc_obj = np.inf
    history = []

    def offer(dropped: frozenset):
        nonlocal incumbent, inc_obj
        cand = evaluate(dropped)
        if cand is not None and cand[3] < inc_obj:
            incumbent, inc_obj = cand, cand[3]
            history.append(inc_obj)

    def tol():
        return max(FATHOM_TOL * abs(inc_obj), options.gap_tol * abs(inc_obj), 1e-15)

    seq = 0
    heap = [_Node(-np.inf, seq, frozenset(), fixed_one)]
    nodes = 0
    root_infeasible = False
    status = MipStatus.OPTIMAL
    while heap:
        if time.perf_counter() - t0 > options.time_limit:
            status = MipStatus.TIME_LIMIT
            break
        node = heapq.heappop(heap)
        if node.bound >= inc_obj - tol():
            continue
        f0, f1 = set(node.fixed0), set(node.fixed1)
        # cardinality propagation
        if len(f1) == K:
            f0 = set(range(T)) - f1
        elif T - len(f0) == K:
            f1 = set(range(T)) - f0
        if len(f1) > K or T - len(f0) < K:
            continue
        nodes += 1
        if len(f0) + len(f1) == T:
            offer(frozenset(f1))
            continue
        node_qp = model.node_qp(f0, f1)
        res = solve_qp(node_qp.qp)
        if res.status is QpStatus.INFEASIBLE:
            if nodes == 1:
                root_infeasible = True
            continue
        free = [t for t in range(T) if t not in f0 and t not in f1]
        if res.optimal:
            bound = max(node.bound, res.objective)
            if bound >= inc_obj - tol():
                continue
            z = node_qp.z(res.v)
            frac = np.abs(z - np.round(z))
            if all(frac[t] <= INT_TOL for t in free):
                offer(frozenset(int(t) for t in np.flatnonzero(np.round(z) > 0.5)))
                continue
            if options.rounding:
                top = sorted(free, key=lambda t: (-z[t], t))[:K - len(f1)]
                offer(frozenset(f1) | frozenset(top))
            # most fractional, smallest index on ties
            branch_t = min(free, key=lambda t: (-min(frac[t], 1.0), t) if frac[t] > INT_TOL
                           else (np.inf, t))
        else:
            logger.warning("node relaxation %s (%s); branching on parent bound",
                           res.status.value, res.message)
            bound = node.bound
            branch_t = free[0]
        seq += 1
        heapq.heappush(heap, _Node(bound, seq, frozenset(f0), frozenset(f1 | {branch_t})))
        seq += 1
        heapq.heappush(heap, _Node(bound, seq, frozenset(f0 | {branch_t}), frozenset(f1)))

    wall = time.perf_counter() - t0
    if incumbent is None:
        if status is MipStatus.TIME_LIMIT:
            lb = min((nd.bound for nd in heap), default=np.inf)
            return MipSolution(None, None, None, np.inf, lb, np.inf, nodes, wall, status,
                               history, n_cuts)
        if root_infeasible:
            logger.info("root relaxation infeasible: return floor unattainable")
        return MipSolution(None, None, None, np.inf, np.inf, np.inf, nodes, wall,
                           MipStatus.INFEASIBLE, history, n_cuts)
    fs, xt, d, obj = incumbent
    if status is MipStatus.TIME_LIMIT:
        open_bounds = [nd.bound for nd in heap if nd.bound < obj - tol()]
        bound = min(open_bounds + [obj])
    else:
        bound = obj
    return MipSolution(fs, xt, d, obj, bound, gap_percent(obj, bound), nodes, wall, status,
                       history, n_cuts)
