"""Periodic modulation of the eigenvalue counting function.

For arithmetically self-similar weights
``ind T(lambda) ~ |lambda|^(D/2) * s_pm(ln|lambda| / nu)`` with 1-periodic
``s_pm``. Given computed eigenvalue lists this module produces

* pointwise two-sided bounds on ``s_pm`` from single index values, and
* renewal-based estimates of ``s_pm`` from the smoothed, rescaled counting
  function ``Lambda_eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pencil import SpectrumReport, _side_sign, build_grid, assemble, inertia_index
from .renewal import HypothesisError, RenewalSystem, solve_continuous
from .selfsim import ArithmeticStructure, SimilarityParams

DEFAULT_EPS = 0.05
RICHARDSON_EPS = (0.1, 0.05, 0.025)
DEFAULT_Q = 200


@dataclass(frozen=True, eq=False)
class IndexCurve:
    """Counting function on one side: ``ind(lambda) = #{n : |lambda_n| < |lambda|}``.

    ``coverage`` is the magnitude below which the eigenvalue list is complete.
    """

    side: str
    magnitudes: np.ndarray
    coverage: float
    depth: int | None = None

    def __post_init__(self):
        mags = np.sort(np.abs(np.asarray(self.magnitudes, dtype=float)))
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "side", "+" if _side_sign(self.side) > 0 else "-")
        if mags.size and self.coverage < mags[-1]:
            raise ValueError("coverage must not be below the largest eigenvalue")

    @classmethod
    def from_report(cls, report: SpectrumReport) -> "IndexCurve":
        mags = [abs(e.value) for e in report.eigenvalues]
        return cls(report.side, np.array(mags), max([report.coverage, *mags]), report.depth)

    @classmethod
    def from_samples(cls, side: str, samples: Sequence[tuple[float, int]], depth=None) -> "IndexCurve":
        """Step curve from ``(lambda, ind)`` samples.

        Jumps sit one ulp below the sample where they are first seen, so the
        curve reproduces every sample exactly.
        """
        pts = sorted((abs(lam), int(c)) for lam, c in samples)
        mags, prev = [], 0
        for mag, c in pts:
            if c < prev:
                raise ValueError("index samples must be nondecreasing in |lambda|")
            mags.extend([np.nextafter(mag, 0.0)] * (c - prev))
            prev = c
        return cls(side, np.array(mags), pts[-1][0] if pts else 0.0, depth)

    @property
    def sign(self) -> int:
        return 1 if self.side == "+" else -1

    def index(self, mag, right: bool = False):
        """Index at ``|lambda| = mag``; ``right`` gives the limit from above."""
        mag = np.abs(np.asarray(mag, dtype=float))
        if np.any(mag > self.coverage):
            raise ValueError("index requested beyond the curve's coverage")
        res = np.searchsorted(self.magnitudes, mag, side="right" if right else "left")
        return int(res) if res.ndim == 0 else res

    def scaled(self, factor: float) -> "IndexCurve":
        return IndexCurve(self.side, self.magnitudes * factor, self.coverage * factor, self.depth)


def _zeta(curve: IndexCurve, nu: float) -> np.ndarray:
    return np.log(curve.magnitudes) / nu


def lambda_profile(curve: IndexCurve, arith: ArithmeticStructure, eps: float, t) -> np.ndarray:
    """``e^(-D nu t/2) eps^-1 int_t^{t+eps} ind(e^(nu z)) dz``, integrated exactly."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if arith.nu is None:
        raise HypothesisError("arithmetic", "no arithmetic step available")
    nu, D = arith.nu, arith.D
    t = np.asarray(t, dtype=float)
    t_max = math.log(curve.coverage) / nu if curve.coverage > 0 else -math.inf
    if np.any(t + eps > t_max + 1e-12):
        raise ValueError("curve too short: t + eps exceeds its coverage")
    z = _zeta(curve, nu)
    flat = t.reshape(-1, 1)
    integral = np.clip(flat + eps - z[None, :], 0.0, eps).sum(axis=1).reshape(t.shape)
    return np.exp(-D * nu * t / 2.0) * integral / eps


# ------------------------------------------------------------- profiles

@dataclass(frozen=True, eq=False)
class ProfileBand:
    lower: np.ndarray
    estimate: np.ndarray
    upper: np.ndarray


@dataclass(eq=False)
class ProfileEstimate:
    t: np.ndarray  # one period, step 1/Q
    plus: ProfileBand | None
    minus: ProfileBand | None
    eps: float | None
    D: float
    nu: float
    J: float
    notes: list[str] = field(default_factory=list)
    extrapolated: dict[str, np.ndarray] = field(default_factory=dict)
    identity_gap: float | None = None  # sup |s_+ - s_-| of the read-offs
    readoff: dict[str, np.ndarray] = field(default_factory=dict)  # Lambda on the last full period

    def band(self, side: str) -> ProfileBand | None:
        return self.plus if _side_sign(side) > 0 else self.minus


def _slack(arith: ArithmeticStructure, slack: float | None) -> float:
    return float(len(arith.l) - 1) if slack is None else float(slack)


def bound_at(
    curve: IndexCurve, arith: ArithmeticStructure, mag: float, slack: float | None = None, right: bool = True
) -> tuple[float, float]:
    """``|lambda|^(-D/2) (ind -+ slack)`` at one point (``right`` gives ``lambda + 0``)."""
    c = curve.index(mag, right=right)
    w = abs(mag) ** (-arith.D / 2.0)
    sl = _slack(arith, slack)
    return max(0.0, w * (c - sl)), w * (c + sl)


def _bounds_one(curve, arith, sl, theta):
    nu, D = arith.nu, arith.D
    if curve.coverage <= 0:
        return None
    top = math.log(curve.coverage) / nu
    bottom = (math.floor(_zeta(curve, nu)[0]) - 1) if curve.magnitudes.size else math.floor(top) - 1
    lower = np.zeros_like(theta)
    upper = np.full_like(theta, np.inf)
    est = np.zeros_like(theta)
    for k in range(int(bottom), int(math.floor(top)) + 1):
        tt = theta + k
        ok = tt < top
        if not np.any(ok):
            continue
        mags = np.exp(nu * tt[ok])
        c = curve.index(mags, right=True)
        w = mags ** (-D / 2.0)
        lower[ok] = np.maximum(lower[ok], w * (c - sl))
        upper[ok] = np.minimum(upper[ok], w * (c + sl))
        est[ok] = w * c
    return lower, est, upper


def s_bounds(
    curve_plus: IndexCurve | None,
    curve_minus: IndexCurve | None,
    arith: ArithmeticStructure,
    slack: float | None = None,
    Q: int = DEFAULT_Q,
) -> ProfileEstimate:
    """Envelope of ``|lambda|^(-D/2) (ind(lambda) -+ slack)`` folded onto one period.

    ``slack`` defaults to ``n - 1``. The point estimate is the read-off at the
    largest covered sample.
    """
    if arith.nu is None:
        raise HypothesisError("arithmetic", "bounds need an arithmetic step")
    sl = _slack(arith, slack)
    theta = np.arange(Q) / Q
    notes = []
    bands = {}
    for key, curve in (("+", curve_plus), ("-", curve_minus)):
        if curve is None:
            bands[key] = None
            continue
        res = _bounds_one(curve, arith, sl, theta)
        if res is None:
            bands[key] = None
            notes.append(f"side {key}: empty curve")
            continue
        lower, est, upper = res
        if np.any(lower > upper):
            notes.append(f"side {key}: lower bound exceeds upper bound somewhere (inconsistent data)")
        est = np.clip(est, lower, np.maximum(lower, upper))
        bands[key] = ProfileBand(lower, est, upper)
    return ProfileEstimate(theta, bands["+"], bands["-"], None, arith.D, arith.nu, arith.J, notes)


def renewal_system(arith: ArithmeticStructure) -> RenewalSystem:
    """Renewal coefficients ``u_k`` (from ``d > 0``) and ``v_k`` (from ``d < 0``)."""
    N = arith.max_lag
    u, v = [0.0] * N, [0.0] * N
    for lk, wk, sk in zip(arith.l, arith.weights, arith.signs):
        if lk is None or wk is None:
            continue
        (u if sk > 0 else v)[lk - 1] += wk
    return RenewalSystem(tuple(u), tuple(v), coupled=any(v))


def check_hypotheses(arith: ArithmeticStructure) -> None:
    if arith.D <= 0:
        raise HypothesisError("positive spectral order", "spectral order is zero")
    if not arith.arithmetic:
        raise HypothesisError("arithmetic", "weight is not arithmetically self-similar")
    if not arith.parity_condition:
        raise HypothesisError(
            "parity", "no piece with d_k > 0 and odd lag, or d_k < 0 and even lag"
        )


def _shifted(values: np.ndarray, steps: int) -> np.ndarray:
    out = np.zeros_like(values)
    if steps < values.size:
        out[steps:] = values[: values.size - steps]
    return out


class _Pipeline:
    def __init__(self, curves, arith, Q, eps_max):
        self.curves, self.arith, self.Q = curves, arith, Q
        nu = arith.nu
        firsts = [_zeta(c, nu)[0] for c in curves.values() if c.magnitudes.size]
        tops = [math.log(c.coverage) / nu for c in curves.values() if c.coverage > 0]
        self.t_start = math.floor(min(firsts) - 1.0) if firsts else 0
        self.t_end = min(tops) - eps_max if tops else self.t_start
        npts = max(1, int(math.floor((self.t_end - self.t_start) * Q + 1e-9)) + 1)
        self.t = self.t_start + np.arange(npts) / Q

    def lam(self, eps):
        return {k: lambda_profile(c, self.arith, eps, self.t) for k, c in self.curves.items()}

    def forcing(self, lam):
        X = {}
        for key, L in lam.items():
            other = lam.get("-" if key == "+" else "+")
            x = L.copy()
            for lk, wk, sk in zip(self.arith.l, self.arith.weights, self.arith.signs):
                if lk is None or wk is None:
                    continue
                src = L if sk > 0 else other
                x -= wk * _shifted(src, lk * self.Q)
            X[key] = x
        return X


def s_estimate(
    curve_plus: IndexCurve | None,
    curve_minus: IndexCurve | None,
    arith: ArithmeticStructure,
    eps: float = DEFAULT_EPS,
    Q: int = DEFAULT_Q,
    *,
    slack: float | None = None,
    rel_shift: float = 0.0,
    extrapolate: bool = True,
) -> ProfileEstimate:
    """Renewal-based estimate of ``s_pm`` with an additive error band.

    The forcing ``X = Lambda - sum w_k Lambda(. - l_k)`` is fed to the
    continuous renewal solver; its periodic limit is the estimate. The band
    adds the truncated tail of the fold, the spread between the last two
    periods of ``Lambda`` and, if given, a discretisation term from the
    relative eigenvalue shift ``rel_shift`` between two depths.
    """
    check_hypotheses(arith)
    system = renewal_system(arith)
    nu, D = arith.nu, arith.D
    sl = _slack(arith, slack)
    if system.coupled:
        if curve_plus is None or curve_minus is None:
            raise HypothesisError("both sides", "a negative d_k couples the sides; give both curves")
    curves = {k: c for k, c in (("+", curve_plus), ("-", curve_minus)) if c is not None}
    if not curves:
        raise ValueError("no curve given")
    eps_set = sorted({eps, *RICHARDSON_EPS}) if extrapolate else [eps]
    pipe = _Pipeline(curves, arith, Q, max(eps_set))
    theta = np.arange(Q) / Q
    phase = (np.arange(pipe.t.size) % Q)
    notes = []

    def fold(e):
        lam = pipe.lam(e)
        X = pipe.forcing(lam)
        T = (pipe.t.size - 1) / Q
        out = {}
        if system.coupled:
            sol = solve_continuous(system, (X["+"], X["-"]), T, 1.0 / Q)
            resid = max(float(np.max(np.abs(sol.z[0] - lam["+"]))), float(np.max(np.abs(sol.z[1] - lam["-"]))))
            out["+"] = out["-"] = sol.profile
        else:
            resid = 0.0
            for key, x in X.items():
                sol = solve_continuous(system, x, T, 1.0 / Q)
                resid = max(resid, float(np.max(np.abs(sol.z[0] - lam[key]))))
                out[key] = sol.profile
        return out, lam, resid

    profiles, lam, resid = fold(eps)
    if resid > 1e-9 * max(1.0, max(float(np.max(np.abs(v))) for v in lam.values())):
        notes.append(f"renewal solution deviates from Lambda by {resid:.3g}")

    # read-off from the last full period and its spread against the previous one
    last = pipe.t.size - Q
    readoff, spread, smooth = {}, {}, {}
    for key, L in lam.items():
        r, s, w = np.zeros(Q), np.zeros(Q), np.zeros(Q)
        if last >= 0:
            tl = pipe.t[last:]
            r[phase[last:]] = L[last:]
            if last - Q >= 0:
                s[phase[last:]] = np.abs(L[last:] - L[last - Q: pipe.t.size - Q])
            else:
                s[:] = np.abs(r)
            # eigenvalues inside the averaging window bias Lambda upwards
            z = _zeta(curves[key], nu)
            inside = np.searchsorted(z, tl + eps, side="right") - np.searchsorted(z, tl, side="right")
            w[phase[last:]] = np.exp(-D * nu * tl / 2.0) * inside
        readoff[key], spread[key], smooth[key] = r, s, w
    if system.coupled:
        for d_ in (spread, smooth):
            d_["+"] = d_["-"] = np.maximum(d_["+"], d_["-"])

    # forcing tail beyond the data, bounded by slack * e^(-D nu t / 2) per side
    t_last = pipe.t[-1]
    first_missing = theta + np.floor(t_last - theta + 1e-9) + 1.0
    q = math.exp(-D * nu / 2.0)
    tail = sl * np.exp(-D * nu * first_missing / 2.0) / (1.0 - q) / arith.J

    extrap = {}
    if extrapolate:
        by_eps = {e: fold(e)[0] for e in RICHARDSON_EPS}
        e0, e1, e2 = RICHARDSON_EPS
        for key in profiles:
            r1 = 2.0 * by_eps[e1][key] - by_eps[e0][key]
            r2 = 2.0 * by_eps[e2][key] - by_eps[e1][key]
            extrap[key] = (4.0 * r2 - r1) / 3.0
        notes.append("extrapolated profiles use Richardson over eps = 0.1, 0.05, 0.025 (no proven rate)")

    bands = {}
    for key, prof in profiles.items():
        est = np.maximum(prof, 0.0)
        band = tail + spread[key] + smooth[key] + est * (D / 2.0) * abs(rel_shift)
        bands[key] = ProfileBand(np.maximum(est - band, 0.0), est, est + band)
    gap = None
    if system.coupled:
        gap = float(np.max(np.abs(readoff["+"] - readoff["-"])))
        notes.append("negative d_k present: s_+ and s_- coincide")
    return ProfileEstimate(
        theta, bands.get("+"), bands.get("-"), eps, D, nu, arith.J, notes, extrap, gap, readoff
    )


# ------------------------------------------------------------ exponents

def exponent_fit(curve) -> tuple[float, float]:
    """Least-squares slope of ``ln lambda_n`` against ``ln n`` and its R^2."""
    mags = curve.magnitudes if isinstance(curve, IndexCurve) else np.abs(np.asarray(curve, dtype=float))
    mags = np.sort(mags)
    if mags.size < 10:
        raise ValueError("need at least 10 eigenvalues for an exponent fit")
    x = np.log(np.arange(1, mags.size + 1))
    y = np.log(mags)
    slope, icept = np.polyfit(x, y, 1)
    resid = y - (slope * x + icept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(slope), r2


def modulation(values, D: float) -> np.ndarray:
    """The column ``n / |lambda_n|^(D/2)``."""
    mags = np.sort(np.abs(np.asarray(values, dtype=float)))
    return np.arange(1, mags.size + 1) / mags ** (D / 2.0)


# ---------------------------------------------------- splitting inequality

@dataclass(frozen=True)
class SplitRow:
    lam: float
    index: tuple[int, int]  # at the two depths
    parts: tuple[int, int]  # sum_k ind(a_k d_k lambda) at the two depths
    converged: bool
    defect: int  # ind - sum, at the finer depth
    ok: bool


@dataclass(eq=False)
class SplittingReport:
    rows: list[SplitRow]
    bound: int

    @property
    def violations(self) -> list[SplitRow]:
        return [r for r in self.rows if r.converged and not r.ok]

    @property
    def converged(self) -> list[SplitRow]:
        return [r for r in self.rows if r.converged]


def check_splitting_inequality(
    p: SimilarityParams, depth_pair: tuple[int, int], lambda_samples: Sequence[float]
) -> SplittingReport:
    """Check ``0 <= ind(lam) - sum_k ind(a_k d_k lam) <= n - 1`` where indices have settled."""
    forms = [assemble(p, build_grid(p, m)) for m in depth_pair]
    scales = [ak * dk for ak, dk in zip(p.a, p.d)]
    rows = []
    for lam in lambda_samples:
        idx, parts = [], []
        part_lists = []
        for K, M in forms:
            idx.append(inertia_index(K, M, lam).index)
            pl = [inertia_index(K, M, s * lam).index if s != 0.0 else 0 for s in scales]
            part_lists.append(pl)
            parts.append(sum(pl))
        converged = idx[0] == idx[1] and part_lists[0] == part_lists[1]
        defect = idx[1] - parts[1]
        rows.append(SplitRow(float(lam), tuple(idx), tuple(parts), converged, defect, 0 <= defect <= p.n - 1))
    return SplittingReport(rows, p.n - 1)
