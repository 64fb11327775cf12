"""Command-line front end: ``fractal-sl <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 hypothesis refusal,
4 partial result (warning printed).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .asymptotics import (
    DEFAULT_EPS,
    DEFAULT_Q,
    IndexCurve,
    bound_at,
    modulation,
    s_bounds,
    s_estimate,
)
from .pencil import LAMBDA_GUARD, assemble, build_grid, eigenvalues, inertia_index
from .renewal import HypothesisError, RenewalSystem, solve_coupled, solve_scalar
from .selfsim import (
    ParameterError,
    SimilarityParams,
    arithmetic_structure,
    builtin,
    parse_builtin,
    spectral_order,
    validate_params,
)

HEADER = "# fractal-sl v1"
# extra |lambda| read-offs printed by s-profile for catalog weights
PRESET_AT = {"hat_P": (1e4,)}
EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_PARTIAL = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass
class RunConfig:
    params: SimilarityParams | None = None
    weight_label: str = ""
    depth: int = 9
    count: int = 20
    side: str = "plus"
    rel_tol: float = 1e-9
    eps: float = DEFAULT_EPS
    lambda_guard: float = LAMBDA_GUARD
    refine: bool = True
    out: Path | None = None
    raw: dict = field(default_factory=dict)


# ----------------------------------------------------------- config I/O

def load_json(path: Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def params_from_dict(data: dict, where: str = "config") -> tuple[SimilarityParams, str]:
    if "builtin" in data:
        name = data["builtin"]
        extra = data.get("params", [])
        if not isinstance(extra, list):
            raise ConfigError(f"{where}: field 'params' must be a list")
        try:
            return builtin(name, *extra), name
        except ParameterError as exc:
            raise ConfigError(f"{where}: field 'builtin': {exc}") from exc
    missing = [k for k in ("a", "d", "beta") if k not in data]
    if missing:
        raise ConfigError(f"{where}: missing field(s) {', '.join(missing)} (or give 'builtin')")
    for k in ("a", "d", "beta"):
        if not isinstance(data[k], list):
            raise ConfigError(f"{where}: field '{k}' must be a list")
    try:
        p = validate_params(data["a"], data["d"], data["beta"], normalize=bool(data.get("normalize", False)))
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return p, "custom"


_OPTION_FIELDS = {"depth": int, "count": int, "side": str, "rel_tol": float, "eps": float, "lambda_guard": float}


def make_config(args) -> RunConfig:
    cfg = RunConfig()
    data: dict = {}
    if getattr(args, "config", None):
        data = load_json(args.config)
        cfg.raw = data
        if "renewal" != args.command:
            cfg.params, cfg.weight_label = params_from_dict(data, str(args.config))
        for key, typ in _OPTION_FIELDS.items():
            if key in data:
                try:
                    setattr(cfg, key, typ(data[key]))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{args.config}: field '{key}': {exc}") from exc
    if getattr(args, "builtin", None):
        try:
            cfg.params = parse_builtin(args.builtin)
        except ParameterError as exc:
            raise ConfigError(f"--builtin: {exc}") from exc
        cfg.weight_label = args.builtin
    for key in _OPTION_FIELDS:
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "no_refine", False):
        cfg.refine = False
    if getattr(args, "out", None):
        cfg.out = Path(args.out)
    if cfg.side not in ("plus", "minus", "+", "-"):
        raise ConfigError(f"side must be plus or minus, got {cfg.side!r}")
    if cfg.depth < 1:
        raise ConfigError("depth must be >= 1")
    return cfg


def _need_params(cfg: RunConfig) -> SimilarityParams:
    if cfg.params is None:
        raise ConfigError("no weight given: use --builtin NAME or --config PATH")
    return cfg.params


class _Output:
    """CSV to ``--out`` (reports to stdout) or CSV to stdout (reports to stderr)."""

    def __init__(self, out: Path | None):
        self.out = out
        self.buf = io.StringIO()
        self.report_stream = sys.stdout if out else sys.stderr

    def writer(self):
        return csv.writer(self.buf, lineterminator="\n")

    def comment(self, text: str):
        self.buf.write(f"# {text}\n")

    def report(self, text: str):
        print(text, file=self.report_stream)

    def close(self):
        data = self.buf.getvalue()
        if self.out:
            self.out.write_text(data)
        else:
            sys.stdout.write(data)


# ----------------------------------------------------------- commands

def cmd_spectral_order(cfg: RunConfig, args) -> int:
    p = _need_params(cfg)
    ar = arithmetic_structure(p, tol=args.tol)
    lines = [
        ("weight", cfg.weight_label),
        ("D", fmt(spectral_order(p))),
        ("arithmetic", str(ar.arithmetic).lower()),
        ("nu", fmt(ar.nu)),
        ("l", " ".join("-" if lk is None else str(lk) for lk in ar.l)),
        ("J", fmt(ar.J)),
        ("parity_condition", str(ar.parity_condition).lower()),
        ("exact_mode", str(ar.exact).lower()),
        ("contraction_margin", fmt(p.margin)),
    ]
    text = "".join(f"{k}: {v}\n" for k, v in lines)
    if cfg.out:
        cfg.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _spectrum_rows(report, D=None):
    rows = []
    for i, e in enumerate(report.eigenvalues, 1):
        row = [i, fmt(e.value), "plus" if e.side == "+" else "minus", fmt(e.bracket_rel_width), fmt(e.depth_shift_rel)]
        rows.append(row)
    if D is not None and rows:
        for row, m in zip(rows, modulation(report.values, D)):
            row.append(fmt(m))
    return rows


def write_spectrum(out: _Output, report, label: str, D=None):
    out.buf.write(HEADER + "\n")
    out.comment(f"weight={label}")
    out.comment(f"side={'plus' if report.side == '+' else 'minus'} depth={report.depth} coverage={fmt(report.coverage)}")
    w = out.writer()
    cols = ["n", "lambda", "side", "bracket_rel_width", "depth_shift_rel"]
    if D is not None:
        cols.append("n_over_lambda_pow")
    w.writerow(cols)
    w.writerows(_spectrum_rows(report, D))


def cmd_eigs(cfg: RunConfig, args) -> int:
    if args.table1:
        cfg = replace(cfg, params=builtin("cantor"), weight_label="cantor", side="plus", count=20, depth=9)
    p = _need_params(cfg)
    if cfg.count < 1:
        raise ConfigError("--count must be >= 1")
    report = eigenvalues(
        p, cfg.side, cfg.count, cfg.depth, cfg.rel_tol, lambda_guard=cfg.lambda_guard, refine=cfg.refine
    )
    out = _Output(cfg.out)
    D = spectral_order(p) if args.table1 else None
    write_spectrum(out, report, cfg.weight_label, D)
    out.close()
    for w in report.warnings:
        out.report(f"warning: {w}")
    return EXIT_PARTIAL if report.partial else EXIT_OK


def cmd_inertia(cfg: RunConfig, args) -> int:
    p = _need_params(cfg)
    if not math.isfinite(args.lam):
        raise ConfigError("--lambda must be finite")
    K, M = assemble(p, build_grid(p, cfg.depth))
    r = inertia_index(K, M, args.lam)
    text = (
        f"lambda: {fmt(r.lam)}\nindex: {r.index}\ndepth: {cfg.depth}\n"
        f"pivot_min: {fmt(r.pivot_min)}\nperturbed: {str(r.perturbed).lower()}\n"
    )
    if cfg.out:
        cfg.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def read_spectrum(path: Path) -> IndexCurve:
    """Re-ingest an ``eigs`` CSV as an :class:`IndexCurve`."""
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, _, v = tok.partition("=")
                    meta[k] = v
        elif line.strip():
            body.append(line)
    if not body:
        raise ConfigError(f"{path}: no CSV header")
    for i, rec in enumerate(csv.DictReader(body), 2):
        try:
            rows.append((float(rec["lambda"]), rec["side"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: row {i}: cannot read lambda/side") from exc
    side = meta.get("side") or (rows[0][1] if rows else None)
    if side not in ("plus", "minus"):
        raise ConfigError(f"{path}: side unknown")
    mags = np.array([abs(v) for v, _ in rows])
    coverage = float(meta["coverage"]) if meta.get("coverage") else (float(mags.max()) if mags.size else 0.0)
    depth = int(meta["depth"]) if meta.get("depth") else None
    return IndexCurve("+" if side == "plus" else "-", mags, coverage, depth)


def _profile_rows(theta, bounds, est):
    rows = []
    for j, t in enumerate(theta):
        row = [fmt(t)]
        for key in ("+", "-"):
            b = bounds.band(key) if bounds else None
            e = est.band(key) if est else None
            if b is None:
                row += ["", "", ""]
                continue
            val = e.estimate[j] if e is not None else b.estimate[j]
            row += [fmt(b.lower[j]), fmt(val), fmt(b.upper[j])]
        rows.append(row)
    return rows


def cmd_s_profile(cfg: RunConfig, args) -> int:
    p = _need_params(cfg)
    ar = arithmetic_structure(p)
    if not ar.arithmetic:
        raise HypothesisError("arithmetic", "weight is not arithmetically self-similar")
    curves: dict[str, IndexCurve] = {}
    if args.spectrum:
        for path in args.spectrum:
            c = read_spectrum(Path(path))
            curves[c.side] = c
    else:
        for sym in ("+", "-"):
            rep = eigenvalues(
                p, sym, cfg.count, cfg.depth, cfg.rel_tol, lambda_guard=cfg.lambda_guard, refine=False
            )
            curves[sym] = IndexCurve.from_report(rep)
    out = _Output(cfg.out)
    notes = []
    for sym in ("+", "-"):
        c = curves.get(sym)
        if c is not None and c.magnitudes.size == 0:
            notes.append(f"side {sym}: no eigenvalues below |lambda| = {fmt(c.coverage)}; profile left empty")
            curves[sym] = None
    cp, cm = curves.get("+"), curves.get("-")
    bounds = s_bounds(cp, cm, ar, Q=args.q)
    est = s_estimate(cp, cm, ar, cfg.eps, args.q, extrapolate=False)
    out.buf.write(HEADER + "\n")
    out.comment(f"weight={cfg.weight_label} eps={fmt(cfg.eps)} D={fmt(ar.D)} nu={fmt(ar.nu)} J={fmt(ar.J)}")
    w = out.writer()
    w.writerow(["t", "s_plus_lo", "s_plus_est", "s_plus_hi", "s_minus_lo", "s_minus_est", "s_minus_hi"])
    w.writerows(_profile_rows(bounds.t, bounds, est))
    out.close()
    for n in notes + bounds.notes + est.notes:
        out.report(f"note: {n}")
    base = f"log_{math.exp(ar.nu):.6g}"
    for sym, c in (("+", cp), ("-", cm)):
        if c is None:
            continue
        best_lo = max(((bound_at(c, ar, m)[0], i) for i, m in enumerate(c.magnitudes, 1)), default=None)
        best_hi = min(((bound_at(c, ar, m)[1], i) for i, m in enumerate(c.magnitudes, 1)), default=None)
        for i, m in enumerate(c.magnitudes, 1):
            lo, hi = bound_at(c, ar, m)
            out.report(f"s_{sym}({base} |lambda_{i}| + 0): [{lo:.4f}, {hi:.4f}]")
        if best_lo and best_hi and best_lo[0] > best_hi[0]:
            out.report(
                f"certificate: s_{sym} is not constant: s_{sym}(lambda_{best_lo[1]}+0) >= {math.floor(best_lo[0] * 100) / 100:.2f}"
                f" > {math.ceil(best_hi[0] * 100) / 100:.2f} >= s_{sym}(lambda_{best_hi[1]}+0)"
            )
        for lam in args.at or PRESET_AT.get(p.name, ()):
            if abs(lam) <= c.coverage:
                lo, hi = bound_at(c, ar, abs(lam))
                out.report(f"s_{sym}({base} {abs(lam):g}): [{lo:.4f}, {hi:.4f}] (ind = {c.index(abs(lam))})")
    return EXIT_OK


def _read_x_file(path: Path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        cols: dict[str, list[float]] = {}
        for i, rec in enumerate(reader, 2):
            for k, v in rec.items():
                try:
                    cols.setdefault(k.strip(), []).append(float(v))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{path}: line {i}: column {k!r}: not a number") from exc
    return cols


def cmd_renewal(cfg: RunConfig, args) -> int:
    data = cfg.raw
    if not data:
        raise ConfigError("renewal needs --config PATH")
    if "u" not in data:
        raise ConfigError(f"{args.config}: missing field 'u'")
    if "x_file" in data:
        xpath = Path(data["x_file"])
        if not xpath.is_absolute():
            xpath = Path(args.config).parent / xpath
        data = {**_read_x_file(xpath), **{k: v for k, v in data.items() if k != "x_file"}}
    try:
        u = [float(x) for x in data["u"]]
        v = [float(x) for x in data.get("v", [])]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{args.config}: fields 'u'/'v' must be numeric lists") from exc
    coupled = bool(data.get("coupled", any(v)))
    sys_ = RenewalSystem(tuple(u), tuple(v), coupled=coupled)
    n_max = int(data.get("n_max", args.n_max))
    if coupled:
        if "x1" in data:
            x1, x2 = data["x1"], data.get("x2", [])
        elif "x" in data and len(data["x"]) == 2 and all(isinstance(r, list) for r in data["x"]):
            x1, x2 = data["x"]
        else:
            raise ConfigError(f"{args.config}: coupled system needs 'x1' and 'x2'")
        sol = solve_coupled(sys_, x1, x2, n_max)
    else:
        if "x" not in data:
            raise ConfigError(f"{args.config}: missing field 'x'")
        sol = solve_scalar(sys_, data["x"], n_max)
    out = _Output(cfg.out)
    out.buf.write(HEADER + "\n")
    w = out.writer()
    w.writerow(["n", "z1", "z2", "limit"] if coupled else ["n", "z1", "limit"])
    for n in range(n_max + 1):
        w.writerow([n, *(fmt(z[n]) for z in sol.z), fmt(sol.limit)])
    out.comment(f"limit={fmt(sol.limit)} omega={fmt(sol.omega)} J={fmt(sol.J)} tail_gap={fmt(sol.gap)}")
    out.close()
    if sol.diagnostic:
        out.report(f"warning: {sol.diagnostic}")
    return EXIT_OK


# ------------------------------------------------------------- parser

def _weight_flags(sp):
    sp.add_argument("--config", type=Path, help="JSON weight/options file")
    sp.add_argument("--builtin", help="catalog weight, e.g. cantor, hat_P, tilde_P:0.2, 'P_a_delta:1/3,0'")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fractal-sl", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectral-order", help="spectral order, step, lags, J")
    _weight_flags(sp)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--out")

    sp = sub.add_parser("eigs", help="eigenvalues by inertia bisection")
    _weight_flags(sp)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--count", type=int)
    sp.add_argument("--side", choices=["plus", "minus", "+", "-"])
    sp.add_argument("--rel-tol", dest="rel_tol", type=float)
    sp.add_argument("--lambda-guard", dest="lambda_guard", type=float)
    sp.add_argument("--no-refine", action="store_true", help="skip the depth+1 shift estimate")
    sp.add_argument("--table1", action="store_true", help="cantor, side plus, 20 eigenvalues, depths 9/10")
    sp.add_argument("--out")

    sp = sub.add_parser("inertia", help="inertia index at one lambda")
    _weight_flags(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--out")

    sp = sub.add_parser("s-profile", help="bounds and estimate of the periodic profiles s_+-")
    _weight_flags(sp)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--count", type=int)
    sp.add_argument("--rel-tol", dest="rel_tol", type=float)
    sp.add_argument("--lambda-guard", dest="lambda_guard", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--q", type=int, default=DEFAULT_Q, help="grid points per period")
    sp.add_argument("--spectrum", action="append", help="eigs CSV to re-ingest (repeatable)")
    sp.add_argument("--at", type=float, action="append", help="also print bounds at this |lambda|")
    sp.add_argument("--out")

    sp = sub.add_parser("renewal", help="solve a lattice renewal system from JSON")
    sp.add_argument("--config", type=Path, required=True)
    sp.add_argument("--n-max", dest="n_max", type=int, default=100)
    sp.add_argument("--out")
    return ap


COMMANDS = {
    "spectral-order": cmd_spectral_order,
    "eigs": cmd_eigs,
    "inertia": cmd_inertia,
    "s-profile": cmd_s_profile,
    "renewal": cmd_renewal,
}


def _join_numeric(argv):
    # argparse takes "-1e4" for an option; glue such values to their flag
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--lambda", "--at"):
            nxt = next(it, None)
            if nxt is not None:
                tok = f"{tok}={nxt}"
        out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_numeric(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s: %(message)s")
    try:
        cfg = make_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS


if __name__ == "__main__":
    sys.exit(main())
