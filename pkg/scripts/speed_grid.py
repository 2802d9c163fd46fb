"""Time EM against an Adam grid of batch sizes and learning rates.

    python3 scripts/speed_grid.py --n 1000 --d 4 --out speed.csv
"""
import argparse
import csv
import sys

import numpy as np

from lookde.trainer import speed_comparison


def synthetic(n, d, seed):
    rng = np.random.default_rng(seed)
    h = n // 2
    x = np.vstack([rng.normal(0.0, 1.0, (h, d)), rng.normal(3.0, 0.5, (n - h, d))])
    return (x - x.mean(0)) / x.std(0, ddof=1)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-sizes", default="128,256,512,1024")
    p.add_argument("--learning-rates", default="0.01,0.05,0.1")
    p.add_argument("--out", default=None)
    a = p.parse_args()
    rows = speed_comparison(
        synthetic(a.n, a.d, a.seed),
        batch_sizes=[int(b) for b in a.batch_sizes.split(",")],
        learning_rates=[float(r) for r in a.learning_rates.split(",")],
    )
    fh = open(a.out, "w", newline="") if a.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if a.out:
        fh.close()


if __name__ == "__main__":
    main()
