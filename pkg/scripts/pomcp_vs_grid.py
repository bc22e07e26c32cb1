"""Agreement between the tree-search planner and the grid solver's greedy action.

    python scripts/pomcp_vs_grid.py --n 30 --rollout mirror --exploration 0.01
    python scripts/pomcp_vs_grid.py --rollout defect --exploration range
"""
import argparse
import time

import numpy as np

from disg.equilibrium import itra
from disg.model import reference_model
from disg.pomcp import pomcp_plan
from disg.reward import GameParams
from disg.solver import q_values, solve_best_response
from disg.strategy import build_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--cost", type=float, default=0.0225)
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--budget", type=int, default=5000)
    ap.add_argument("--horizon", type=int, default=60)
    ap.add_argument("--margin", type=float, default=0.003)
    ap.add_argument("--rollout", choices=["mirror", "defect"], default="mirror")
    ap.add_argument("--exploration", default="0.01", help="UCB weight in bits, or 'range'")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model, params = reference_model(), GameParams.symmetric(args.cost)
    C = itra(model, params, 100, build_grid(2, 200)).region
    vt = solve_best_response(model, C, params, 1)
    explore = None if args.exploration == "range" else float(args.exploration)
    rng = np.random.default_rng(args.seed)
    agree = n = 0
    t0 = time.perf_counter()
    while n < args.n:
        q = rng.random()
        qd, qs = q_values(model, vt, [q, 1 - q], params, 1)
        if abs(qs - qd) <= args.margin or not C.contains([q, 1 - q]):
            continue
        n += 1
        r = pomcp_plan(model, C, params, [q, 1 - q], 1, args.budget, args.horizon,
                       seed=int(rng.integers(2**31)), rollout=args.rollout, exploration=explore)
        hit = r.action == int(qs >= qd)
        agree += hit
        print(f"pi0={q:.3f} grid gap {qs - qd:+.4f} tree gap {r.q_estimates[1] - r.q_estimates[0]:+.4f} "
              f"{'ok' if hit else 'MISS'}")
    print(f"{agree}/{n} agree in {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
