"""Spectral order of tilde_P(a): bisection against the closed form, and its
approach to 2 as a grows to 1/3."""
import argparse
import math

import numpy as np

from fractal_sl import builtin, spectral_order


def closed_form(a):
    return math.log(9) / (math.log(2 - 5 * a) - math.log(a) - math.log(1 - 2 * a))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=12)
    args = ap.parse_args()
    grid = list(np.linspace(0.02, 0.33, args.points)) + [0.333, 0.3333]
    print(f"{'a':>8} {'D (bisection)':>15} {'D (closed)':>12} {'|diff|':>9}")
    for a in grid:
        D = spectral_order(builtin("tilde_P", float(a)))
        ref = closed_form(a)
        print(f"{a:>8.4f} {D:>15.12f} {ref:>12.9f} {abs(D - ref):>9.1e}")


if __name__ == "__main__":
    main()
