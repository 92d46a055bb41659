"""Command-line front end.

    python3 -m scenfilter.cli backtest --config exp.cfg --out-dir results
    python3 -m scenfilter.cli solve --data prices.csv --method filter-exact --K 2
    python3 -m scenfilter.cli verify --n 5 --T 12 --K 2 --seeds 10
    python3 -m scenfilter.cli gen-data --data prices.csv --seed 7

Exit codes: 0 success, 1 runtime error, 2 validation error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from scenfilter.backtest import BASE_METHODS, run_backtest
from scenfilter.baselines import (
    power_map,
    psd_repair,
    rmt_filter,
    solve_filtered_markowitz,
    solve_markowitz,
)
from scenfilter.config import ConfigError, load_config
from scenfilter.filter_models import (
    BnbOptions,
    FilterInstance,
    InfeasibleError,
    SolverError,
    brute_force_oracle,
    solve_branch_and_bound,
)
from scenfilter.heuristic import heuristic_v1, heuristic_v2
from scenfilter.market_data import (
    DataError,
    ReturnScenarioMatrix,
    compute_returns,
    compute_stats,
    load_prices,
    market_portfolio_return,
    write_prices,
)
from scenfilter.synthetic import SyntheticSpec, generate_prices

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2
VERIFY_TOL = 1e-6

logger = logging.getLogger("scenfilter")


def bundled_data_path() -> Path:
    return Path(str(resources.files("scenfilter") / "data" / "synthetic_10x120.csv"))


def _load_returns(path: Optional[str]) -> ReturnScenarioMatrix:
    return compute_returns(load_prices(path or bundled_data_path()))


def _flags(args, names) -> dict:
    out = {}
    for key, attr in names.items():
        v = getattr(args, attr, None)
        if v is not None:
            out[key] = v
    return out


def cmd_backtest(args) -> int:
    flags = _flags(args, {"data": "data", "K_max": "K", "p": "p", "q": "q",
                          "time_limit": "time_limit", "out_dir": "out_dir", "seed": "seed",
                          "workers": "workers"})
    if args.method:
        flags["methods"] = tuple(m.strip() for m in args.method.split(",") if m.strip())
    cfg = load_config(args.config, flags)
    r = _load_returns(cfg.data)
    report = run_backtest(r, list(cfg.methods), cfg.scheme, cfg.backtest_params())
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "report.json")
    report.write_metrics_csv(out / "metrics.csv")
    report.write_values_csv(out / "values.csv")
    (out / "config.cfg").write_text(cfg.dumps())
    print(report.metrics_table())
    skipped = [w for w in report.results if w.skipped]
    if skipped:
        print(f"{len(skipped)} (window, method) results skipped; see report.json")
    print(f"reports written to {out}")
    return EXIT_OK


SOLVE_METHODS = ("market", "markowitz", "rmt", "power", "filter-exact", "filter-oracle",
                 "heuristic-v1", "heuristic-v2")


def cmd_solve(args) -> int:
    method = args.method or "filter-exact"
    if method not in SOLVE_METHODS:
        raise ConfigError("method", f"unknown method {method!r}; expected one of "
                                    f"{', '.join(SOLVE_METHODS)}")
    time_limit = 7200.0 if args.time_limit is None else args.time_limit
    if not time_limit > 0:
        raise ConfigError("time_limit", "must be positive")
    r = _load_returns(args.data)
    mu0 = market_portfolio_return(r) if args.mu0 is None else args.mu0
    K = 1 if args.K is None else args.K
    n = r.n_assets
    if method == "market":
        out = {"weights": [1.0 / n] * n}
    elif method in ("markowitz", "rmt", "power"):
        stats = compute_stats(r)
        if method == "markowitz":
            sol = solve_markowitz(stats, mu0)
            out = {}
        else:
            fc = (rmt_filter(stats, 5 if args.p is None else args.p) if method == "rmt"
                  else power_map(stats, 1.25 if args.q is None else args.q))
            fc = psd_repair(fc)
            sol = solve_filtered_markowitz(stats, fc, mu0)
            out = {"filter": {k: v for k, v in fc.to_dict().items() if k != "matrix"}}
        x = np.maximum(sol.v[:n], 0.0)
        out.update(status=sol.status.value, weights=(x / x.sum()).tolist(),
                   objective=sol.objective, iterations=sol.iterations)
    else:
        if not 0 <= K < r.n_scenarios:
            raise ConfigError("K", f"must lie in [0, {r.n_scenarios})")
        inst = FilterInstance(r, K, mu0)
        if method == "filter-exact":
            out = solve_branch_and_bound(inst, BnbOptions(time_limit=time_limit)).to_dict()
        elif method == "filter-oracle":
            out = brute_force_oracle(inst).to_dict()
        elif method == "heuristic-v1":
            out = heuristic_v1(inst, time_limit=time_limit).to_dict()
        else:
            out = heuristic_v2(inst).to_dict()
    out = {"method": method, "mu0": mu0, **out}
    print(json.dumps(out, indent=1))
    if out.get("status") == "Infeasible":
        print("error: no portfolio meets the return floor", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def verify_instance(n: int, T: int, K: int, seed: int) -> dict:
    """Exact vs oracle vs both heuristics on one uniform random instance."""
    rng = np.random.default_rng(seed)
    r = ReturnScenarioMatrix(rng.uniform(-0.1, 0.1, (n, T)))
    inst = FilterInstance(r, K, market_portfolio_return(r))
    exact = solve_branch_and_bound(inst)
    oracle = brute_force_oracle(inst)
    row = {"seed": seed, "exact": exact.objective, "oracle": oracle.objective,
           "exact_status": exact.status.value, "nodes": exact.nodes}
    if K == 0:
        mk = solve_markowitz(compute_stats(r), inst.mu0)
        row["markowitz"] = mk.objective
        row["ok"] = bool(abs(exact.objective - mk.objective) <= VERIFY_TOL * max(abs(mk.objective), 1e-12)
                         and abs(oracle.objective - mk.objective) <= VERIFY_TOL * max(abs(mk.objective), 1e-12))
        return row
    h1 = heuristic_v1(inst)
    h2 = heuristic_v2(inst)
    row.update(heuristic_v1=h1.objective, heuristic_v2=h2.objective)
    ref = max(abs(oracle.objective), 1e-12)
    ok = abs(exact.objective - oracle.objective) <= VERIFY_TOL * ref
    # heuristics can only be worse than the optimum
    ok &= h1.objective >= oracle.objective - VERIFY_TOL * ref
    ok &= h2.objective >= oracle.objective - VERIFY_TOL * ref
    if K == 1:
        ok &= abs(h1.objective - oracle.objective) <= VERIFY_TOL * ref
        ok &= abs(h2.objective - oracle.objective) <= VERIFY_TOL * ref
    row["ok"] = bool(ok)
    return row


def cmd_verify(args) -> int:
    import math

    from scenfilter.filter_models.oracle import MAX_SUBSETS

    n, T = args.n, args.T
    K = 2 if args.K is None else args.K
    if not 0 <= K < T:
        raise ConfigError("K", f"must lie in [0, {T})")
    if math.comb(T, K) > MAX_SUBSETS:
        raise ConfigError("K", f"C({T},{K}) exceeds the enumeration guard {MAX_SUBSETS}")
    base = 0 if args.seed is None else args.seed
    rows = [verify_instance(n, T, K, base + i) for i in range(args.seeds)]
    for row in rows:
        print(json.dumps(row))
    passed = sum(r["ok"] for r in rows)
    print(f"{passed}/{len(rows)} exact-vs-oracle matches (n={n}, T={T}, K={K})")
    return EXIT_OK if passed == len(rows) else EXIT_RUNTIME


def cmd_gen_data(args) -> int:
    spec = SyntheticSpec(n_assets=args.n_assets, n_weeks=args.weeks,
                         seed=0 if args.seed is None else args.seed)
    if spec.n_assets < 1 or spec.n_weeks < 1:
        raise ConfigError("n_assets/weeks", "must be positive")
    path = Path(args.data or "synthetic_prices.csv")
    write_prices(path, generate_prices(spec))
    print(f"wrote {spec.n_assets} assets x {spec.n_weeks + 1} weekly prices to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scenfilter", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config")
        p.add_argument("--data")
        p.add_argument("--method")
        p.add_argument("--K", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--q", type=float)
        p.add_argument("--time-limit", type=float, dest="time_limit")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--workers", type=int)

    p = sub.add_parser("backtest", help="rolling-window comparison of the methods")
    common(p)
    p.set_defaults(func=cmd_backtest)
    p = sub.add_parser("solve", help="solve one instance on the whole data set")
    common(p)
    p.add_argument("--mu0", type=float, help="return floor (default: market average)")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("verify", help="exact vs oracle vs heuristics on random instances")
    common(p)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--T", type=int, default=12)
    p.add_argument("--seeds", type=int, default=10)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("gen-data", help="write a seeded synthetic price panel")
    common(p)
    p.add_argument("--n-assets", type=int, default=10, dest="n_assets")
    p.add_argument("--weeks", type=int, default=120)
    p.set_defaults(func=cmd_gen_data)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InfeasibleError, SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
