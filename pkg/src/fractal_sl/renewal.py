"""Lattice renewal equations with finitely supported step distributions.

Scalar:   z_n = x_n + sum_k u_k z_{n-k}
Coupled:  z_{j,n} = x_{j,n} + sum_k (u_k z_{j,n-k} + v_k z_{3-j,n-k}),  j = 1, 2

plus the continuous-time versions on a grid ``t = i / Q``, where integer lags
land exactly on grid points. Solutions are computed by forward recursion.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

SUM_TOL = 1e-12
LIMIT_DIAG_TOL = 1e-6


class HypothesisError(ValueError):
    """A renewal-theorem hypothesis does not hold; ``clause`` names which."""

    def __init__(self, clause: str, message: str):
        super().__init__(f"{clause}: {message}")
        self.clause = clause


@dataclass(frozen=True)
class WeightedSequence:
    entries: tuple[float, ...]
    r: float = 1.0

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("weight r must be positive")

    @property
    def norm(self) -> float:
        """The l_{1,r} norm ``sum r^k |theta_k|``."""
        return math.fsum(self.r**k * abs(x) for k, x in enumerate(self.entries))

    @classmethod
    def delta(cls, r: float = 1.0) -> "WeightedSequence":
        return cls((1.0,), r)


@dataclass(frozen=True)
class RenewalSystem:
    """Coefficients ``u_k``, ``v_k`` for lags ``k = 1..N`` (``u[0]`` is ``u_1``)."""

    u: tuple[float, ...]
    v: tuple[float, ...] = ()
    coupled: bool = False

    def __post_init__(self):
        u = tuple(float(x) for x in self.u)
        v = tuple(float(x) for x in self.v)
        N = max(len(u), len(v))
        object.__setattr__(self, "u", u + (0.0,) * (N - len(u)))
        object.__setattr__(self, "v", v + (0.0,) * (N - len(v)))

    @property
    def N(self) -> int:
        return len(self.u)

    @property
    def J(self) -> float:
        return math.fsum((k + 1) * (uk + vk) for k, (uk, vk) in enumerate(zip(self.u, self.v)))

    def check(self) -> None:
        """Raise :class:`HypothesisError` naming the first violated clause."""
        if self.N == 0:
            raise HypothesisError("support", "no coefficients given")
        if any(x < 0 or not math.isfinite(x) for x in (*self.u, *self.v)):
            raise HypothesisError("nonnegativity", "coefficients must be finite and >= 0")
        total = math.fsum(self.u) + math.fsum(self.v)
        if abs(total - 1.0) > SUM_TOL:
            raise HypothesisError("normalization", f"sum of coefficients is {total!r}, expected 1")
        support = [k + 1 for k in range(self.N) if self.u[k] + self.v[k] > 0]
        g = reduce(math.gcd, support)
        if g != 1:
            raise HypothesisError("gcd", f"gcd of the support {support} is {g}, expected 1")
        if not self.coupled:
            if any(self.v):
                raise HypothesisError("scalar", "scalar system must have v = 0")
            return
        if not math.fsum(self.v) > 0:
            raise HypothesisError("cross-coupling", "coupled system needs sum v_k > 0")
        odd_u = any(self.u[k] > 0 for k in range(0, self.N, 2))
        even_v = any(self.v[k] > 0 for k in range(1, self.N, 2))
        if not (odd_u or even_v):
            raise HypothesisError(
                "parity", "need an odd k with u_k > 0 or an even k with v_k > 0"
            )


@dataclass(frozen=True, eq=False)
class RenewalSolution:
    z: tuple[np.ndarray, ...]
    omega: float
    J: float
    limit: float
    gap: float  # empirical max |z - limit| over the tail window
    tail_mean: float
    diagnostic: str | None = None
    # continuous mode only
    t: np.ndarray | None = None
    profile: np.ndarray | None = field(default=None)  # one period, t = j / Q
    error_band: np.ndarray | None = None  # |z_n - limit| per index


def _as_array(x) -> np.ndarray:
    if isinstance(x, WeightedSequence):
        return np.asarray(x.entries, dtype=float)
    return np.asarray(x, dtype=float)


def _tail_stats(zs, limit, start):
    tails = [z[start:] for z in zs]
    gap = max(float(np.max(np.abs(t - limit))) if t.size else 0.0 for t in tails)
    tail_mean = float(np.mean(np.concatenate(tails))) if tails[0].size else limit
    diag = None
    if abs(tail_mean - limit) > LIMIT_DIAG_TOL:
        diag = (
            f"empirical tail mean {tail_mean:.10g} differs from omega/J = {limit:.10g}; "
            "slow mixing or near-violated hypotheses"
        )
        log.warning(diag)
    return gap, tail_mean, diag


def _recurse(sys: RenewalSystem, xs: list[np.ndarray], n_max: int) -> list[np.ndarray]:
    u = np.array(sys.u)
    v = np.array(sys.v)
    N = sys.N
    ncomp = len(xs)
    z = [np.zeros(n_max + 1) for _ in range(ncomp)]
    for j in range(ncomp):
        m = min(xs[j].size, n_max + 1)
        z[j][:m] = xs[j][:m]
    ur, vr = u[::-1], v[::-1]
    for n in range(1, n_max + 1):
        lo = max(0, n - N)
        uu, vv = ur[N - (n - lo):], vr[N - (n - lo):]
        if ncomp == 1:
            z[0][n] += np.dot(uu, z[0][lo:n])
        else:
            a0, a1 = z[0][lo:n], z[1][lo:n]
            z[0][n] += np.dot(uu, a0) + np.dot(vv, a1)
            z[1][n] += np.dot(uu, a1) + np.dot(vv, a0)
    return z


def solve_scalar(sys: RenewalSystem, x, n_max: int) -> RenewalSolution:
    """Forward recursion for the scalar system, with limit ``omega / J``."""
    if sys.coupled:
        raise HypothesisError("scalar", "use solve_coupled for a coupled system")
    sys.check()
    xa = _as_array(x)
    (z,) = _recurse(sys, [xa], n_max)
    omega = math.fsum(xa)
    J = sys.J
    limit = omega / J
    gap, tail_mean, diag = _tail_stats([z], limit, n_max // 2 + 1)
    return RenewalSolution((z,), omega, J, limit, gap, tail_mean, diag, error_band=np.abs(z - limit))


def solve_coupled(sys: RenewalSystem, x1, x2, n_max: int) -> RenewalSolution:
    """Forward recursion for the coupled pair; both components tend to ``omega / J``."""
    if not sys.coupled:
        raise HypothesisError("cross-coupling", "system is not marked coupled")
    sys.check()
    a1, a2 = _as_array(x1), _as_array(x2)
    z1, z2 = _recurse(sys, [a1, a2], n_max)
    omega = 0.5 * (math.fsum(a1) + math.fsum(a2))
    J = sys.J
    limit = omega / J
    gap, tail_mean, diag = _tail_stats([z1, z2], limit, n_max // 2 + 1)
    band = np.maximum(np.abs(z1 - limit), np.abs(z2 - limit))
    return RenewalSolution((z1, z2), omega, J, limit, gap, tail_mean, diag, error_band=band)


def grid_steps(dt: float) -> int:
    """``Q`` with ``dt = 1/Q``; anything else is rejected."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    Q = round(1.0 / dt)
    if Q < 1 or abs(1.0 / dt - Q) > 1e-9 * Q:
        raise ValueError(f"dt = {dt!r} is not of the form 1/Q; integer lags would miss the grid")
    return Q


def _sample(X, t: np.ndarray) -> np.ndarray:
    if callable(X):
        vals = np.asarray(X(t), dtype=float)
    else:
        vals = np.asarray(X, dtype=float)
        if vals.size < t.size:
            vals = np.concatenate([vals, np.zeros(t.size - vals.size)])
        vals = vals[: t.size]
    return np.broadcast_to(vals, t.shape).astype(float)


def fold_period(values: np.ndarray, Q: int) -> np.ndarray:
    """``sum_k values[j + k Q]`` for ``j = 0..Q-1`` (one-period fold)."""
    pad = (-values.size) % Q
    return np.concatenate([values, np.zeros(pad)]).reshape(-1, Q).sum(axis=0)


def solve_continuous(
    sys: RenewalSystem,
    X: Callable | np.ndarray | Sequence,
    T: float,
    dt: float,
) -> RenewalSolution:
    """Grid solution of the continuous renewal equation(s) on ``[0, T]``.

    ``X`` is a callable of ``t`` (vectorised) or samples at ``t = i dt``; for a
    coupled system pass a pair ``(X1, X2)``. Forcing is taken to vanish for
    ``t < 0``. The returned ``profile`` is the periodic limit ``s`` on one period
    (``t = j dt``), folded from every available sample; ``gap`` is
    ``max |Z - s|`` over the last unit interval.
    """
    sys.check()
    Q = grid_steps(dt)
    npts = int(round(T * Q)) + 1
    t = np.arange(npts) / Q
    comps = list(X) if sys.coupled else [X]
    if sys.coupled and len(comps) != 2:
        raise ValueError("coupled system needs a pair of forcing functions")
    xs = [_sample(c, t) for c in comps]
    z = [x.copy() for x in xs]
    # each unit block only reads earlier blocks
    for start in range(Q, npts, Q):
        stop = min(start + Q, npts)
        for k in range(1, sys.N + 1):
            src = start - k * Q
            if src < 0:
                break
            sl, ss = slice(start, stop), slice(src, src + stop - start)
            uk, vk = sys.u[k - 1], sys.v[k - 1]
            if len(z) == 1:
                z[0][sl] += uk * z[0][ss]
            else:
                z0, z1 = z[0][ss].copy(), z[1][ss].copy()
                z[0][sl] += uk * z0 + vk * z1
                z[1][sl] += uk * z1 + vk * z0
    J = sys.J
    total = sum(xs)
    scale = 1.0 / J if len(xs) == 1 else 1.0 / (2.0 * J)
    profile = scale * fold_period(total, Q)
    omega = float(np.sum(total)) / Q * (1.0 if len(xs) == 1 else 0.5)
    last = t >= t[-1] - 1.0
    idx = np.arange(npts)[last] % Q
    gap = max(float(np.max(np.abs(zz[last] - profile[idx]))) for zz in z)
    tail_mean = float(np.mean(np.concatenate([zz[last] for zz in z])))
    band = np.max([np.abs(zz - profile[np.arange(npts) % Q]) for zz in z], axis=0)
    return RenewalSolution(
        tuple(z), omega, J, float(np.mean(profile)), gap, tail_mean, None,
        t=t, profile=profile, error_band=band,
    )


def recursion_residual(sys: RenewalSystem, xs: Sequence, sol: RenewalSolution) -> float:
    """Max defect of the lattice recursion over all indices (both components)."""
    zs = sol.z
    n = zs[0].size
    worst = 0.0
    for j, z in enumerate(zs):
        x = np.zeros(n)
        xa = _as_array(xs[j])[:n]
        x[: xa.size] = xa
        rhs = x.copy()
        for k in range(1, sys.N + 1):
            rhs[k:] += sys.u[k - 1] * z[:-k]
            if len(zs) == 2:
                rhs[k:] += sys.v[k - 1] * zs[1 - j][:-k]
        worst = max(worst, float(np.max(np.abs(z - rhs))))
    return worst
