"""PGM snapshots of stationary box configurations and their height-3 clusters.

Writes ``<prefix>_p<p>_heights.pgm`` (grey levels 0..3) and
``<prefix>_p<p>_clusters.pgm`` (the five largest clusters brightest).
"""
import argparse

import numpy as np

from stochsand.grid2d import BoxChain, cluster_image, label_clusters, write_pgm
from stochsand.rng import make_rng


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--L", type=int, default=100)
    ap.add_argument("--p", default="0.5,0.64,0.8")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--prefix", default="snapshot")
    a = ap.parse_args(argv)
    for i, p in enumerate(float(x) for x in a.p.split(",")):
        h = next(BoxChain(a.L, p, make_rng(a.seed, a.L, i)).samples(1))
        labels, sizes = label_clusters(map(tuple, np.argwhere(h == 3)), a.L)
        with open(f"{a.prefix}_p{p:g}_heights.pgm", "w") as fh:
            write_pgm(h, fh, maxval=3)
        with open(f"{a.prefix}_p{p:g}_clusters.pgm", "w") as fh:
            write_pgm(cluster_image(labels), fh, maxval=6)
        print(f"p={p:g}: {len(sizes)} clusters, largest {sizes[0] if sizes else 0}")


if __name__ == "__main__":
    main()
