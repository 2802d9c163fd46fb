"""Plain vs leave-one-out log-likelihood as one bandwidth shrinks.

Prints a small table; the plain likelihood grows by about d*log(10) per
decade while the leave-one-out value stays under its bound.

    python3 scripts/collapse_demo.py --n 50 --j 3
"""
import argparse
import math

import numpy as np

from lookde.density import KernelDensityModel, collapse_curve, loo_mll, loo_upper_bound, override_bandwidth


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--j", type=int, default=3)
    p.add_argument("--decades", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()

    x = np.random.default_rng(a.seed).uniform(-2, 2, (a.n, a.d))
    model = KernelDensityModel.a_kde(x, 0.1)
    bound = loo_upper_bound(x)
    sigmas = [10.0 ** -k for k in range(1, a.decades + 1)]
    prev = None
    print(f"{'sigma':>8} {'total_mll':>14} {'step':>9} {'loo_mll':>12}   bound {bound:.4f}")
    for s, total in collapse_curve(model, x, a.j, sigmas):
        loo = loo_mll(override_bandwidth(model, a.j, s)).value
        step = "" if prev is None else f"{total - prev:9.5f}"
        print(f"{s:8.0e} {total:14.5f} {step:>9} {loo:12.5f}")
        prev = total
    print(f"d*log(10) = {a.d * math.log(10):.5f}")


if __name__ == "__main__":
    main()
