"""Cooperation bands over pi(X=0) for the reference model and nearby costs.

Writes bands.csv and bands.svg to --out and prints each band's runs.

    python scripts/cooperation_bands.py --out runs/bands
    python scripts/cooperation_bands.py --costs 0.0225 0.022 --grid 100
"""
import argparse
import csv
from pathlib import Path

from disg.cli import emit_region_plot
from disg.equilibrium import itra
from disg.model import reference_model
from disg.reward import GameParams
from disg.strategy import build_grid, write_region_rows

REFERENCE = [(0.027, 0.6, 0.6), (0.024, 0.6, 0.6), (0.024, 0.65, 0.6)]
BAND = [(0.0225, 0.6, 0.6), (0.022, 0.6, 0.6), (0.021, 0.65, 0.6)]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs/bands")
    ap.add_argument("--grid", type=int, default=200)
    ap.add_argument("--delta", type=float, default=0.9)
    ap.add_argument("--costs", type=float, nargs="*", help="extra costs at p1=p2=0.6")
    args = ap.parse_args()

    configs = REFERENCE + BAND + [(c, 0.6, 0.6) for c in args.costs or []]
    grid = build_grid(2, args.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labelled = []
    with open(out / "bands.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for i, (c, p1, p2) in enumerate(configs):
            rep = itra(reference_model(p1, p2), GameParams(delta=args.delta, cost=(c, c)), 100, grid)
            label = f"c={c:g} p1={p1:g} p2={p2:g}"
            write_region_rows(w, rep.region, label=label, header=(i == 0))
            labelled.append((label, rep.region))
            print(f"{label:28s} {len(rep.region):4d}/{grid.size} fixed={rep.halted_fixed_point} runs={rep.region.runs()}")
    (out / "bands.svg").write_text(emit_region_plot(labelled))
    print(f"wrote {out / 'bands.csv'} and {out / 'bands.svg'}")


if __name__ == "__main__":
    main()
