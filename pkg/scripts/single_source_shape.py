"""Normalised toppled radius ``D_right / (n/2)`` of ``n`` particles started at the origin.

    python3 scripts/single_source_shape.py --n 100,1000,10000,100000 --runs 20
"""
import argparse
import sys

from stochsand.single_source import shape_sweep, write_shape_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--n", default="100,1000,10000,100000")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--method", choices=["auto", "direct", "segment"], default="auto")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    a = ap.parse_args(argv)
    rows, _ = shape_sweep([int(x) for x in a.n.split(",")], a.runs, a.seed, a.method)
    fh = sys.stdout if a.out == "-" else open(a.out, "w", newline="")
    with fh:
        write_shape_csv(rows, fh)


if __name__ == "__main__":
    main()
