"""Average stationary density of the p-toppling box chain as a function of p.

    python3 scripts/density_curve.py --L 20 --samples 200 --out density.csv
"""
import argparse
import sys

import numpy as np

from stochsand.grid2d import ChainSettings, density_sweep, write_density_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--L", type=int, default=20)
    ap.add_argument("--p-min", type=float, default=0.1)
    ap.add_argument("--p-max", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=19)
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--burn-in", type=int)
    ap.add_argument("--thinning", type=int)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    a = ap.parse_args(argv)
    ps = np.round(np.linspace(a.p_min, a.p_max, a.points), 6).tolist()
    pts = density_sweep(a.L, ps, a.samples, a.seed, ChainSettings(a.burn_in, a.thinning))
    fh = sys.stdout if a.out == "-" else open(a.out, "w", newline="")
    with fh:
        write_density_csv(pts, fh)
    best = max(pts, key=lambda pt: pt.rho)
    print(f"max rho {best.rho:.4f} at p={best.p:g}", file=sys.stderr)


if __name__ == "__main__":
    main()
