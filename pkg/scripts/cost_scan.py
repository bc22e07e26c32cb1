"""ItRA region size as a function of the sharing cost.

Prints the largest reception gain, the cost above which sharing can never
pay (delta * max gain), and the region found at each cost on the scan.

    python scripts/cost_scan.py --lo 0.018 --hi 0.028 --steps 21
"""
import argparse

import numpy as np

from disg.equilibrium import itra
from disg.model import reference_model
from disg.reward import GameParams
from disg.solver import reward_bound
from disg.strategy import build_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--lo", type=float, default=0.018)
    ap.add_argument("--hi", type=float, default=0.028)
    ap.add_argument("--steps", type=int, default=21)
    ap.add_argument("--p1", type=float, default=0.6)
    ap.add_argument("--p2", type=float, default=0.6)
    ap.add_argument("--grid", type=int, default=200)
    ap.add_argument("--delta", type=float, default=0.9)
    args = ap.parse_args()

    model = reference_model(args.p1, args.p2)
    grid = build_grid(2, args.grid)
    r_max = reward_bound(model, grid, 1)
    print(f"max gain {r_max:.6f} bits; sharing never pays above c = {args.delta * r_max:.6f}")
    for c in np.linspace(args.lo, args.hi, args.steps):
        rep = itra(model, GameParams(delta=args.delta, cost=(c, c)), 100, grid)
        print(f"c={c:.5f}  {len(rep.region):4d}/{grid.size}  {rep.region.runs()}")


if __name__ == "__main__":
    main()
