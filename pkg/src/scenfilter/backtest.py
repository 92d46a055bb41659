"""Rolling-window out-of-sample comparison of the portfolio models.

Windows are 1-based and inclusive: the in-sample block [s, s+L-1] is
followed by the holding block [s+L, min(s+L+H-1, T_total)], and s advances
by ``step``. Each method picks weights on the in-sample block only; the
weights are then held fixed (rebalanced to target) over the holding block.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from scenfilter.baselines import (
    FloorMode,
    power_map,
    psd_repair,
    rmt_filter,
    solve_filtered_markowitz,
    solve_markowitz,
)
from scenfilter.filter_models import (
    BnbOptions,
    FilterInstance,
    InfeasibleError,
    MipStatus,
    SolverError,
    solve_branch_and_bound,
)
from scenfilter.heuristic import heuristic_v1, heuristic_v2
from scenfilter.market_data import (
    ReturnScenarioMatrix,
    compute_stats,
    market_portfolio_return,
)

logger = logging.getLogger(__name__)

ASSET_THRESHOLD = 0.01
RISK_FREE = 0.0

BASE_METHODS = ("market", "markowitz", "rmt", "power", "filter-exact", "heuristic-v1",
                "heuristic-v2")
_FILTER_METHODS = ("filter-exact", "heuristic-v1", "heuristic-v2")


@dataclass(frozen=True)
class WindowScheme:
    in_sample_len: int = 52
    out_sample_len: int = 12
    step: int = 12

    def __post_init__(self):
        if self.step < 1:
            raise ValueError("step must be at least 1")
        if self.in_sample_len < 2:
            raise ValueError("in_sample_len must be at least 2")
        if self.out_sample_len < 1:
            raise ValueError("out_sample_len must be at least 1")


def roll_windows(total_returns: int, scheme: WindowScheme = WindowScheme()
                 ) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """1-based inclusive (in_range, out_range) pairs; truncated last windows are kept."""
    L, H = scheme.in_sample_len, scheme.out_sample_len
    if total_returns < L + 1:
        raise ValueError(f"{total_returns} returns cannot fill an in-sample block of {L} "
                         "plus one holding week")
    out = []
    s = 1
    while s + L <= total_returns:
        out.append(((s, s + L - 1), (s + L, min(s + L + H - 1, total_returns))))
        s += scheme.step
    return out


@dataclass(frozen=True)
class BacktestParams:
    K_max: int = 3
    p: int = 5
    q: float = 1.25
    time_limit: float = 7200.0
    floor_mode: str = "inequality"
    use_cuts: bool = False
    mu0: Optional[float] = None  # None: in-sample equally weighted market average
    workers: int = 1


@dataclass
class WindowResult:
    window: int
    in_range: tuple[int, int]
    out_range: tuple[int, int]
    method: str
    weights: Optional[np.ndarray]
    wall_time: float
    out_returns: np.ndarray
    objective: Optional[float] = None
    gap_percent: Optional[float] = None
    status: str = "Optimal"
    skipped: bool = False
    message: str = ""
    filtered: Optional[list] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "in_range": list(self.in_range),
            "out_range": list(self.out_range),
            "method": self.method,
            "weights": None if self.weights is None else self.weights.tolist(),
            "wall_time": self.wall_time,
            "out_returns": self.out_returns.tolist(),
            "objective": _num(self.objective),
            "gap_percent": _num(self.gap_percent),
            "status": self.status,
            "skipped": self.skipped,
            "message": self.message,
            "filtered": self.filtered,
            "extra": self.extra,
        }


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass(frozen=True)
class PerformanceMetrics:
    av_return: float
    v_out: float
    sharpe: float
    mean_assets: float
    mean_time: float
    mean_gap: Optional[float] = None
    mre: Optional[float] = None
    n_windows: int = 0
    n_skipped: int = 0

    def to_dict(self) -> dict:
        return {k: _num(v) if isinstance(v, float) else v for k, v in asdict(self).items()}


def compute_metrics(results: Sequence[WindowResult],
                    exact_ref: Optional[Sequence[WindowResult]] = None) -> PerformanceMetrics:
    """Aggregate one method's windows.

    Variance is the population (divide-by-count) variance of the concatenated
    holding-period returns. ``exact_ref`` enables the mean relative error of
    the objectives, matched by window; it is not clamped at zero.
    """
    live = [w for w in results if not w.skipped]
    if not live:
        raise ValueError("no solved windows to aggregate")
    y = np.concatenate([w.out_returns for w in live])
    mean = float(np.mean(y))
    std = float(np.std(y))
    sharpe = (mean - RISK_FREE) / std if std > 0 else float("nan")
    assets = float(np.mean([np.count_nonzero(w.weights >= ASSET_THRESHOLD) for w in live]))
    mean_time = float(np.mean([w.wall_time for w in live]))
    gaps = [w.gap_percent for w in live if w.gap_percent is not None]
    mean_gap = float(np.mean(gaps)) if gaps else None
    mre = None
    if exact_ref is not None:
        ref = {w.window: w for w in exact_ref if not w.skipped and w.objective is not None}
        errs = [100.0 * (w.objective - ref[w.window].objective) / abs(ref[w.window].objective)
                for w in live if w.window in ref and w.objective is not None
                and ref[w.window].objective != 0]
        mre = float(np.mean(errs)) if errs else None
    return PerformanceMetrics(mean, float(np.var(y)), sharpe, assets, mean_time, mean_gap, mre,
                              len(results), len(results) - len(live))


def portfolio_value_series(results: Sequence[WindowResult]) -> np.ndarray:
    """Compounded value path starting at 1 over the concatenated holding weeks."""
    live = sorted((w for w in results if not w.skipped), key=lambda w: w.window)
    y = np.concatenate([w.out_returns for w in live]) if live else np.zeros(0)
    return np.concatenate([[1.0], np.cumprod(1.0 + y)])


def method_tags(methods: Sequence[str], K_values: Sequence[int]) -> list[str]:
    tags = []
    for m in methods:
        if m not in BASE_METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {', '.join(BASE_METHODS)}")
        if m in _FILTER_METHODS:
            tags.extend(f"{m}(K={k})" for k in K_values)
        else:
            tags.append(m)
    return tags


def _clean(x: np.ndarray) -> np.ndarray:
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return x / x.sum()


def _solve_window(method: str, R: ReturnScenarioMatrix, mu0: float, params: BacktestParams,
                  K_values: Sequence[int]) -> list[tuple[str, dict]]:
    """Solve one base method on one in-sample block.

    Returns (tag, fields) pairs; the nested heuristics produce every K from
    a single run, each step timed cumulatively.
    """
    n = R.n_assets
    fm = FloorMode(params.floor_mode)
    t0 = time.perf_counter()
    if method == "market":
        return [("market", dict(weights=np.full(n, 1.0 / n), wall_time=0.0))]
    if method in ("markowitz", "rmt", "power"):
        stats = compute_stats(R)
        extra = {}
        if method == "markowitz":
            sol = solve_markowitz(stats, mu0, fm)
        else:
            fc = rmt_filter(stats, params.p) if method == "rmt" else power_map(stats, params.q)
            fc = psd_repair(fc)
            extra["repair_shift"] = fc.repair_shift
            sol = solve_filtered_markowitz(stats, fc, mu0, fm)
        return [(method, dict(weights=_clean(sol.v[:n]), wall_time=time.perf_counter() - t0,
                              objective=sol.objective, extra=extra))]
    if method == "filter-exact":
        out = []
        for k in K_values:
            t0 = time.perf_counter()
            inst = FilterInstance(R, k, mu0)
            res = solve_branch_and_bound(inst, BnbOptions(time_limit=params.time_limit,
                                                          use_cuts=params.use_cuts))
            tag = f"filter-exact(K={k})"
            wall = time.perf_counter() - t0
            if res.best is None:
                out.append((tag, dict(skipped=True, status=res.status.value, wall_time=wall,
                                      message="no feasible portfolio found")))
                continue
            out.append((tag, dict(weights=res.best.x, wall_time=wall, objective=res.objective,
                                  gap_percent=res.gap_percent, status=res.status.value,
                                  filtered=res.best.filtered, extra={"nodes": res.nodes})))
        return out
    # nested heuristics
    k_max = max(K_values)
    ks = [k for k in K_values if k >= 1]
    inst = FilterInstance(R, k_max, mu0)
    if method == "heuristic-v1":
        trace = heuristic_v1(inst, time_limit=params.time_limit, use_cuts=params.use_cuts)
    else:
        trace = heuristic_v2(inst)
    out = []
    cum = 0.0
    for st in trace.steps:
        cum += st.wall_time
        if st.k in ks:
            out.append((f"{method}(K={st.k})",
                        dict(weights=st.solution.x, wall_time=cum, objective=st.objective,
                             filtered=st.solution.filtered)))
    return out


@dataclass
class BacktestReport:
    scheme: WindowScheme
    params: BacktestParams
    methods: list[str]
    windows: list
    results: list[WindowResult]
    metrics: dict[str, PerformanceMetrics] = field(default_factory=dict)

    def by_method(self, tag: str) -> list[WindowResult]:
        return sorted((w for w in self.results if w.method == tag), key=lambda w: w.window)

    def value_series(self) -> dict[str, np.ndarray]:
        return {m: portfolio_value_series(self.by_method(m)) for m in self.methods}

    def to_dict(self) -> dict:
        return {
            "scheme": asdict(self.scheme),
            "params": asdict(self.params),
            "methods": self.methods,
            "windows": [{"in_range": list(a), "out_range": list(b)} for a, b in self.windows],
            "metrics": {m: v.to_dict() for m, v in self.metrics.items()},
            "results": [w.to_dict() for w in self.results],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    def write_metrics_csv(self, path) -> None:
        cols = ["Method", "AvReturn", "V-Out", "Sharpe", "MeanAssets", "MeanTime", "MeanGap",
                "MRE", "Windows", "Skipped"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for m in self.methods:
                pm = self.metrics.get(m)
                if pm is None:
                    w.writerow([m] + [""] * 7 + [len(self.by_method(m)), len(self.by_method(m))])
                    continue
                w.writerow([m, pm.av_return, pm.v_out, pm.sharpe, pm.mean_assets, pm.mean_time,
                            "" if pm.mean_gap is None else pm.mean_gap,
                            "" if pm.mre is None else pm.mre, pm.n_windows, pm.n_skipped])

    def write_values_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["week", "method", "value"])
            for m, vals in self.value_series().items():
                for i, v in enumerate(vals):
                    w.writerow([i, m, v])

    def metrics_table(self) -> str:
        head = f"{'Method':<22}{'AvReturn':>11}{'V-Out':>11}{'Sharpe':>9}{'Assets':>8}" \
               f"{'Time':>9}{'Gap%':>8}{'MRE%':>9}"
        lines = [head]
        for m in self.methods:
            pm = self.metrics.get(m)
            if pm is None:
                lines.append(f"{m:<22}  (all windows skipped)")
                continue
            gap = "" if pm.mean_gap is None else f"{pm.mean_gap:.3f}"
            mre = "" if pm.mre is None else f"{pm.mre:.4f}"
            lines.append(f"{m:<22}{pm.av_return:>11.6f}{pm.v_out:>11.3e}{pm.sharpe:>9.4f}"
                         f"{pm.mean_assets:>8.2f}{pm.mean_time:>9.3f}{gap:>8}{mre:>9}")
        return "\n".join(lines)


def run_backtest(r: ReturnScenarioMatrix, methods: Sequence[str],
                 scheme: WindowScheme = WindowScheme(), params: BacktestParams = BacktestParams(),
                 K_values: Optional[Sequence[int]] = None) -> BacktestReport:
    """Run every method on every window and aggregate the metrics.

    A method that fails on a window (unattainable floor, solver failure) is
    recorded as skipped for that window; the run carries on.
    """
    if not methods:
        raise ValueError("at least one method is required")
    if K_values is None:
        K_values = list(range(1, params.K_max + 1))
    K_values = sorted(set(int(k) for k in K_values))
    if any(k < 0 or k >= scheme.in_sample_len for k in K_values):
        raise ValueError("every K must lie in [0, in_sample_len)")
    if "rmt" in methods and not 1 <= params.p <= r.n_assets:
        raise ValueError(f"p={params.p} must lie in [1, {r.n_assets}]")
    tags = method_tags(methods, K_values)
    windows = roll_windows(r.n_scenarios, scheme)
    heur_ks = [k for k in K_values if k >= 1]

    jobs = []
    for wi, (ins, outs) in enumerate(windows):
        for m in methods:
            if m.startswith("heuristic") and not heur_ks:
                continue
            jobs.append((wi, ins, outs, m))

    def run(job):
        wi, ins, outs, m = job
        R = r.subset(slice(ins[0] - 1, ins[1]))
        R_out = r.returns[:, outs[0] - 1:outs[1]]
        mu0 = params.mu0 if params.mu0 is not None else market_portfolio_return(R)
        ks = K_values if m == "filter-exact" else heur_ks
        t0 = time.perf_counter()
        try:
            solved = _solve_window(m, R, mu0, params, ks)
        except (InfeasibleError, SolverError) as exc:
            logger.info("window %d %s skipped: %s", wi, m, exc)
            wall = time.perf_counter() - t0
            status = "Infeasible" if isinstance(exc, InfeasibleError) else "SolverError"
            sub = [t for t in tags if t == m or t.startswith(m + "(")]
            return [WindowResult(wi, ins, outs, t, None, wall, np.zeros(0), status=status,
                                 skipped=True, message=str(exc)) for t in sub]
        out = []
        for tag, f in solved:
            weights = f.pop("weights", None)
            skipped = f.pop("skipped", False) or weights is None
            y = np.zeros(0) if skipped else weights @ R_out
            out.append(WindowResult(wi, ins, outs, tag, weights, out_returns=y, skipped=skipped,
                                    **f))
        # the nested heuristic may stop early: flag the missing K values
        have = {w.method for w in out}
        for t in tags:
            if (t == m or t.startswith(m + "(")) and t not in have:
                out.append(WindowResult(wi, ins, outs, t, None, time.perf_counter() - t0,
                                        np.zeros(0), status="Infeasible", skipped=True,
                                        message="step not reached"))
        return out

    if params.workers > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            chunks = list(pool.map(run, jobs))
    else:
        chunks = [run(j) for j in jobs]
    results = [w for c in chunks for w in c]
    order = {t: i for i, t in enumerate(tags)}
    results.sort(key=lambda w: (w.window, order[w.method]))

    report = BacktestReport(scheme, params, tags, windows, results)
    for t in tags:
        rows = report.by_method(t)
        if not any(not w.skipped for w in rows):
            continue
        ref = None
        if t.startswith("heuristic"):
            exact_tag = "filter-exact" + t[t.index("("):]
            if exact_tag in order:
                ref = report.by_method(exact_tag)
        report.metrics[t] = compute_metrics(rows, ref)
    return report
