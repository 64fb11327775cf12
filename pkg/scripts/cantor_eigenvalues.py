"""First 20 eigenvalues of the cantor-ladder weight.

Prints computed eigenvalues at depths 9 and 10, 3-digit reference values,
the relative deviation and the modulation column n / lambda_n^(log_6 2).
"""
import argparse
import time
from dataclasses import dataclass

import numpy as np

from fractal_sl import builtin, eigenvalues, spectral_order
from fractal_sl.asymptotics import modulation

REFERENCE = np.array([
    14.4, 35.3, 141, 151, 326, 353, 876, 876, 1580, 1620,
    2030, 2030, 2270, 2290, 5260, 5260, 9230, 9270, 9590, 9600,
])


@dataclass
class CantorConfig:
    depth: int = 9
    count: int = 20
    rel_tol: float = 1e-9


def run(cfg: CantorConfig):
    p = builtin("cantor")
    t0 = time.perf_counter()
    rep = eigenvalues(p, "+", cfg.count, cfg.depth, cfg.rel_tol)
    secs = time.perf_counter() - t0
    col = modulation(rep.values, spectral_order(p))
    print(f"{'n':>3} {'lambda (m)':>14} {'shift m->m+1':>13} {'reference':>10} {'rel dev':>8} {'n/l^log6(2)':>12}")
    for i, (e, c) in enumerate(zip(rep.eigenvalues, col)):
        pub = REFERENCE[i] if i < REFERENCE.size else float("nan")
        print(f"{i + 1:>3} {e.value:>14.6f} {e.depth_shift_rel:>13.2e} {pub:>10g} {abs(e.value / pub - 1):>8.4f} {c:>12.4f}")
    print(f"depth {cfg.depth} (+1 for shifts), {secs:.2f} s")
    return rep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=9)
    ap.add_argument("--count", type=int, default=20)
    args = ap.parse_args()
    run(CantorConfig(depth=args.depth, count=args.count))


if __name__ == "__main__":
    main()
