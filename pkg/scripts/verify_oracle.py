"""Exact branch and bound against full enumeration on random instances.

Prints one row per (seed, K) and a summary with node counts and timings.

    python3 scripts/verify_oracle.py --seeds 50 --K 1 2 3
"""
import argparse
import time

import numpy as np

from scenfilter.filter_models import BnbOptions, FilterInstance, brute_force_oracle, solve_branch_and_bound
from scenfilter.heuristic import heuristic_v2
from scenfilter.market_data import ReturnScenarioMatrix, market_portfolio_return


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--T", type=int, default=12)
    ap.add_argument("--K", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--cuts", action="store_true")
    args = ap.parse_args()

    print(f"{'seed':>4} {'K':>2} {'exact':>12} {'oracle':>12} {'heur':>12} {'nodes':>6} {'t_bnb':>7}")
    worst, t_bnb, t_orc = 0.0, 0.0, 0.0
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        r = ReturnScenarioMatrix(rng.uniform(-0.1, 0.1, (args.n, args.T)))
        for K in args.K:
            inst = FilterInstance(r, K, market_portfolio_return(r))
            exact = solve_branch_and_bound(inst, BnbOptions(use_cuts=args.cuts))
            t0 = time.perf_counter()
            oracle = brute_force_oracle(inst, workers=1)
            t_orc += time.perf_counter() - t0
            t_bnb += exact.wall_time
            h = heuristic_v2(inst)
            worst = max(worst, abs(exact.objective - oracle.objective) / abs(oracle.objective))
            print(f"{seed:>4} {K:>2} {exact.objective:12.6e} {oracle.objective:12.6e} "
                  f"{h.objective:12.6e} {exact.nodes:>6} {exact.wall_time:7.3f}")
    print(f"worst relative gap {worst:.2e}; branch and bound {t_bnb:.1f} s, "
          f"enumeration {t_orc:.1f} s")


if __name__ == "__main__":
    main()
