"""Band data for s_+ of a catalog weight: pointwise bounds and the renewal
estimate on one period, written as CSV for plotting."""
import argparse
import csv
import sys
from dataclasses import dataclass

from fractal_sl import builtin, eigenvalues
from fractal_sl.asymptotics import IndexCurve, s_bounds, s_estimate
from fractal_sl.selfsim import arithmetic_structure, parse_builtin


@dataclass
class BandConfig:
    weight: str = "cantor"
    depth: int = 9
    count: int = 40
    eps: float = 0.05
    Q: int = 200


def band(cfg: BandConfig):
    p = parse_builtin(cfg.weight)
    ar = arithmetic_structure(p)
    curves = {}
    for side in "+-":
        rep = eigenvalues(p, side, cfg.count, cfg.depth, refine=False)
        curves[side] = IndexCurve.from_report(rep) if rep.eigenvalues else None
    b = s_bounds(curves["+"], curves["-"], ar, Q=cfg.Q)
    e = s_estimate(curves["+"], curves["-"], ar, cfg.eps, cfg.Q)
    return b, e


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--weight", default="cantor")
    ap.add_argument("--depth", type=int, default=9)
    ap.add_argument("--count", type=int, default=40)
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args()
    b, e = band(BandConfig(args.weight, args.depth, args.count, args.eps))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "lower", "upper", "estimate", "est_lo", "est_hi", "extrapolated"])
    for j, t in enumerate(b.t):
        w.writerow([
            f"{t:.4f}", f"{b.plus.lower[j]:.6f}", f"{b.plus.upper[j]:.6f}",
            f"{e.plus.estimate[j]:.6f}", f"{e.plus.lower[j]:.6f}", f"{e.plus.upper[j]:.6f}",
            f"{e.extrapolated['+'][j]:.6f}",
        ])
    if args.out:
        fh.close()
    for note in e.notes:
        print(f"note: {note}", file=sys.stderr)


if __name__ == "__main__":
    main()
