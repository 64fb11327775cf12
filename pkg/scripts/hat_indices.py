"""Inertia indices of the hat_P weight at lambda = +-1e4 across depths, with the
resulting two-sided bounds on s_+ and s_- at log_6 1e4."""
import argparse

from fractal_sl import assemble, build_grid, builtin, inertia_index
from fractal_sl.selfsim import arithmetic_structure


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=1e4)
    ap.add_argument("--depths", type=int, nargs="+", default=[6, 7, 8, 9, 10])
    args = ap.parse_args()
    p = builtin("hat_P")
    ar = arithmetic_structure(p)
    w = args.lam ** (-ar.D / 2)
    slack = p.n - 1
    print(f"{'depth':>5} {'ind(+)':>7} {'ind(-)':>7} {'s+ lower':>9} {'s- upper':>9}")
    for m in args.depths:
        K, M = assemble(p, build_grid(p, m))
        ip = inertia_index(K, M, args.lam).index
        im = inertia_index(K, M, -args.lam).index
        print(f"{m:>5} {ip:>7} {im:>7} {w * (ip - slack):>9.4f} {w * (im + slack):>9.4f}")


if __name__ == "__main__":
    main()
