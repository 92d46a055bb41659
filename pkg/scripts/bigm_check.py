"""Sampled check that the big-M constants bound every scenario deviation.

Also reports how the node count and runtime react to inflated constants.

    python3 scripts/bigm_check.py --instances 20 --samples 1000
"""
import argparse

import numpy as np

from scenfilter.filter_models import BnbOptions, FilterInstance, compute_big_m, solve_branch_and_bound
from scenfilter.filter_models.bigm import sample_bigm_excess
from scenfilter.market_data import ReturnScenarioMatrix, market_portfolio_return


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--T", type=int, default=12)
    ap.add_argument("--K", type=int, default=2)
    ap.add_argument("--scale", type=float, default=10.0)
    args = ap.parse_args()

    print(f"{'seed':>4} {'excess':>10} {'samples':>7} {'nodes':>6} {'nodes_xM':>8} {'obj_shift':>9}")
    for seed in range(args.instances):
        rng = np.random.default_rng(seed)
        r = ReturnScenarioMatrix(rng.uniform(-0.1, 0.1, (args.n, args.T)))
        inst = FilterInstance(r, args.K, market_portfolio_return(r))
        excess, got = sample_bigm_excess(inst, compute_big_m(inst), args.samples, seed=seed)
        a = solve_branch_and_bound(inst)
        b = solve_branch_and_bound(inst, BnbOptions(bigm_scale=args.scale))
        print(f"{seed:>4} {excess:10.2e} {got:>7} {a.nodes:>6} {b.nodes:>8} "
              f"{abs(a.objective - b.objective):9.1e}")


if __name__ == "__main__":
    main()
