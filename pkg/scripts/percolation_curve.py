"""Left-right spanning probability of the height-3 set versus p, for several box sizes.

    python3 scripts/percolation_curve.py --L 20,40 --samples 100 --out spanning.csv
"""
import argparse
import sys

import numpy as np

from stochsand.grid2d import ChainSettings, spanning_probability, write_percolation_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--L", default="20,40", help="comma-separated box sides")
    ap.add_argument("--p-min", type=float, default=0.4)
    ap.add_argument("--p-max", type=float, default=0.9)
    ap.add_argument("--points", type=int, default=11)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    a = ap.parse_args(argv)
    ps = np.round(np.linspace(a.p_min, a.p_max, a.points), 6).tolist()
    results = []
    for L in (int(x) for x in a.L.split(",")):
        for p in ps:
            res = spanning_probability(L, p, a.samples, a.seed, ChainSettings())
            results.append(res)
            print(f"L={L} p={p:g} P={res.spanning_prob:.3f}", file=sys.stderr)
    fh = sys.stdout if a.out == "-" else open(a.out, "w", newline="")
    with fh:
        write_percolation_csv(results, fh)


if __name__ == "__main__":
    main()
