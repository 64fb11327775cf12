"""Galerkin discretisation of the pencil ``y'' -> -y'' - lambda * P' y``.

On hat functions over an IFS-aligned grid the pencil form
``int y'z' + lambda int P (y z)'`` becomes ``K + lambda M`` with both
matrices tridiagonal; ``M`` is exact because each cell only needs
``int P`` and ``int x P`` there.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numba import njit

from .selfsim import CellArrays, CellWord, SimilarityParams, depth_cells

log = logging.getLogger(__name__)

MAX_NODES = 10**7
LAMBDA_GUARD = 1e8
DENSE_MAX = 2000
PIVOT_EPS = 1e-14


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AlignedGrid:
    params: SimilarityParams
    depth: int
    nodes: np.ndarray
    cells: CellArrays

    @property
    def size(self) -> int:
        """Number of interior nodes (unknowns)."""
        return self.nodes.size - 2

    def word(self, i: int) -> CellWord:
        """Word of the ``i``-th cell (0-based, left to right)."""
        n = self.params.n
        letters = []
        for _ in range(self.depth):
            i, r = divmod(i, n)
            letters.append(r + 1)
        return CellWord(tuple(reversed(letters)))


def build_grid(p: SimilarityParams, depth: int, max_nodes: int = MAX_NODES) -> AlignedGrid:
    if depth < 1:
        raise GridError("depth must be >= 1")
    count = p.n**depth + 1
    if count > max_nodes:
        raise GridError(f"{count} nodes exceed the guard of {max_nodes}")
    cells = depth_cells(p, depth)
    nodes = np.append(cells.left, 1.0)
    return AlignedGrid(p, depth, nodes, cells)


@dataclass(frozen=True, eq=False)
class TridiagonalForm:
    diag: np.ndarray
    off: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)


def assemble(p: SimilarityParams, g: AlignedGrid) -> tuple[TridiagonalForm, TridiagonalForm]:
    """Stiffness ``K`` and weight form ``M_ij = int P (phi_i phi_j)'``."""
    c = g.cells
    h, xl, m0, m1 = c.length, c.left, c.m0, c.m1
    xr = g.nodes[1:]
    kd = 1.0 / h[:-1] + 1.0 / h[1:]
    ko = -1.0 / h[1:-1]
    # interior node i is the right end of cell i-1 and the left end of cell i
    md = 2.0 * (m1[:-1] - xl[:-1] * m0[:-1]) / h[:-1] ** 2 + 2.0 * (m1[1:] - xr[1:] * m0[1:]) / h[1:] ** 2
    mo = ((xl[1:-1] + xr[1:-1]) * m0[1:-1] - 2.0 * m1[1:-1]) / h[1:-1] ** 2
    return TridiagonalForm(kd, ko), TridiagonalForm(md, mo)


@njit(cache=True, nogil=True)
def _sturm_count(kd, ko, md, mo, lam, eps):
    n = kd.shape[0]
    count = 0
    pmin = np.inf
    prev = 1.0
    for i in range(n):
        t = kd[i] + lam * md[i]
        scale = abs(t)
        if i > 0:
            o = ko[i - 1] + lam * mo[i - 1]
            t -= o * o / prev
            scale += o * o / abs(prev)
        if abs(t) < pmin:
            pmin = abs(t)
        if abs(t) <= eps * scale:
            return count, pmin, True
        if t < 0.0:
            count += 1
        prev = t
    return count, pmin, False


@dataclass(frozen=True)
class InertiaResult:
    lam: float
    index: int
    pivot_min: float
    perturbed: bool = False


def inertia_index(K: TridiagonalForm, M: TridiagonalForm, lam: float) -> InertiaResult:
    """Number of negative eigenvalues of ``K + lam M`` by Sturm pivots.

    A near-zero pivot shifts ``lam`` by a relative 1e-12 and flags the result.
    """
    if K.size != M.size:
        raise ValueError("forms must have equal size")
    if K.size == 0 or lam == 0.0:
        return InertiaResult(lam, 0, math.inf if K.size == 0 else float(np.min(K.diag)), False)
    mu = float(lam)
    for attempt in range(8):
        count, pmin, broke = _sturm_count(K.diag, K.off, M.diag, M.off, mu, PIVOT_EPS)
        if not broke:
            return InertiaResult(float(lam), int(count), float(pmin), attempt > 0)
        mu = mu * (1.0 + 1e-12 * 2**attempt)
    raise FloatingPointError(f"pivot breakdown persists near lambda = {lam!r}")


# ---------------------------------------------------------- eigenvalues

@dataclass(frozen=True)
class Eigenvalue:
    value: float
    side: str  # "+" or "-"
    lo: float
    hi: float
    multiplicity: int = 1
    depth_shift_rel: float | None = None

    @property
    def bracket_rel_width(self) -> float:
        return (self.hi - self.lo) / self.hi


@dataclass(eq=False)
class SpectrumReport:
    eigenvalues: list[Eigenvalue]
    side: str
    depth: int
    ind_samples: list[InertiaResult] = field(default_factory=list)
    coverage: float = 0.0  # |lambda| up to which the list is complete
    partial: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.eigenvalues])

    @property
    def flagged(self) -> list[Eigenvalue]:
        return [e for e in self.eigenvalues if e.multiplicity > 1]


def _workers() -> int:
    env = os.environ.get("FRACTAL_SL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


class _Slicer:
    """Spectrum slicing on one side of zero by bisection in ``|lambda|``."""

    def __init__(self, K, M, sign):
        self.K, self.M, self.sign = K, M, sign
        self.samples: list[InertiaResult] = []

    def ind(self, mag: float) -> int:
        r = inertia_index(self.K, self.M, self.sign * mag)
        self.samples.append(r)
        return r.index

    def upper(self, count: int, guard: float) -> tuple[float, int]:
        mag = 1.0
        while True:
            c = self.ind(mag)
            if c >= count or mag >= guard:
                return mag, c
            mag = min(mag * 4.0, guard)

    def locate(self, k: int, lo: float, hi: float, rel_tol: float) -> tuple[float, float, int]:
        """Bracket the k-th eigenvalue magnitude given ``ind(lo) < k <= ind(hi)``."""
        c_lo = 0 if lo == 0.0 else self.ind(lo)
        c_hi = self.ind(hi)
        while (hi - lo) > rel_tol * hi:
            mid = 0.5 * hi if lo == 0.0 else math.sqrt(lo * hi)
            if not lo < mid < hi:
                mid = 0.5 * (lo + hi)
                if not lo < mid < hi:
                    break
            c = self.ind(mid)
            if c >= k:
                hi, c_hi = mid, c
            else:
                lo, c_lo = mid, c
        return lo, hi, c_hi - c_lo


def _slice(K, M, sign, count, rel_tol, guard, workers):
    sl = _Slicer(K, M, sign)
    top, avail = sl.upper(count, guard)
    n_found = min(count, avail)
    coverage = top if avail < count else 0.0

    def run(k):
        s = _Slicer(K, M, sign)
        lo, hi, mult = s.locate(k, 0.0, top, rel_tol)
        return lo, hi, mult, s.samples

    ks = list(range(1, n_found + 1))
    if workers > 1 and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            found = list(ex.map(run, ks))
    else:
        found = [run(k) for k in ks]
    for *_, smp in found:
        sl.samples.extend(smp)
    if avail >= count and found:
        coverage = found[-1][1]
    return found, coverage, avail, sl.samples


def eigenvalues(
    p: SimilarityParams,
    side: str = "+",
    count: int = 1,
    depth: int = 8,
    rel_tol: float = 1e-9,
    *,
    lambda_guard: float = LAMBDA_GUARD,
    refine: bool = True,
    workers: int | None = None,
) -> SpectrumReport:
    """First ``count`` eigenvalues on one side of zero, bracketed by bisection.

    With ``refine`` the same search runs at ``depth + 1`` and each eigenvalue
    carries the relative shift as a discretisation-error estimate.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    sign = _side_sign(side)
    sym = "+" if sign > 0 else "-"
    workers = _workers() if workers is None else workers

    K, M = assemble(p, build_grid(p, depth))
    found, coverage, avail, samples = _slice(K, M, sign, count, rel_tol, lambda_guard, workers)
    shifts: list[float | None] = [None] * len(found)
    if refine and found:
        K2, M2 = assemble(p, build_grid(p, depth + 1))
        fine, *_ = _slice(K2, M2, sign, len(found), rel_tol, lambda_guard, workers)
        for i, (f, c) in enumerate(zip(fine, found)):
            v0, v1 = 0.5 * (c[0] + c[1]), 0.5 * (f[0] + f[1])
            shifts[i] = (v1 - v0) / v0

    eigs = []
    warnings = []
    for i, ((lo, hi, mult, _), sh) in enumerate(zip(found, shifts)):
        eigs.append(Eigenvalue(sign * 0.5 * (lo + hi), sym, lo, hi, mult, sh))
        if mult > 1:
            warnings.append(f"eigenvalue {i + 1} shares its bracket with {mult - 1} other(s)")
    if avail < count:
        msg = (
            f"only {avail} eigenvalue(s) on side {sym} below |lambda| = {lambda_guard:g}; "
            f"requested {count}"
        )
        warnings.append(msg)
        log.warning(msg)
    return SpectrumReport(
        eigs, sym, depth, samples, coverage=coverage, partial=avail < count, warnings=warnings
    )


def _side_sign(side) -> int:
    if side in ("+", "plus", 1, +1):
        return 1
    if side in ("-", "minus", -1):
        return -1
    raise ValueError(f"side must be '+' or '-', got {side!r}")


# -------------------------------------------------------------- oracle

@dataclass(frozen=True, eq=False)
class OracleSpectrum:
    nu: np.ndarray  # eigenvalues of L^-1 M L^-T
    eigenvalues: np.ndarray  # finite pencil eigenvalues -1/nu, ascending

    def index(self, lam: float) -> int:
        if lam > 0:
            return int(np.sum(self.nu < -1.0 / lam))
        if lam < 0:
            return int(np.sum(self.nu > -1.0 / lam))
        return 0


def dense_oracle(
    K: TridiagonalForm, M: TridiagonalForm, lambda_max: float | None = None
) -> OracleSpectrum:
    """Pencil spectrum by Cholesky congruence and a dense symmetric eigensolve."""
    if K.size > DENSE_MAX:
        raise ValueError(f"dense oracle limited to size {DENSE_MAX}")
    L = scipy.linalg.cholesky(K.to_dense(), lower=True)
    X = scipy.linalg.solve_triangular(L, M.to_dense(), lower=True)
    C = scipy.linalg.solve_triangular(L, X.T, lower=True)
    C = 0.5 * (C + C.T)
    nu = scipy.linalg.eigh(C, eigvals_only=True)
    scale = max(1.0, float(np.max(np.abs(nu)))) if nu.size else 1.0
    nz = nu[np.abs(nu) > 1e-14 * scale]
    lam = np.sort(-1.0 / nz)
    if lambda_max is not None:
        lam = lam[np.abs(lam) <= lambda_max]
    return OracleSpectrum(nu, lam)
