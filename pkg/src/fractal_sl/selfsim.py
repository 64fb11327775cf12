"""Self-similar functions in L2[0, 1] given by their similarity parameters.

A similarity operator is fixed by ``n`` pieces with lengths ``a``, scalings
``d`` and offsets ``beta``; on the k-th subinterval ``(alpha_k, alpha_{k+1})``
the fixed point satisfies ``P(x) = beta_k + d_k * P((x - alpha_k) / a_k)``.
Everything here is exact arithmetic on that relation: no quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np

SUM_TOL = 1e-12
MAX_DENOMINATOR = 10**6
_FACTOR_LIMIT = 10**12


class ParameterError(ValueError):
    """Similarity parameters that do not define a contractive operator."""


def parse_number(value) -> Fraction | float:
    """Accept ints, floats, Fractions and exact strings such as ``"1/3"``.

    Strings and ints come back as :class:`Fraction` (exact); floats stay floats.
    """
    if isinstance(value, bool):
        raise ParameterError(f"not a number: {value!r}")
    if isinstance(value, (Fraction, int)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ParameterError(f"non-finite parameter {value!r}")
        return value
    if isinstance(value, str):
        s = value.strip()
        if s.lower().startswith("ln"):
            raise ParameterError(f"logarithmic literals are not supported: {value!r}")
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"cannot parse number {value!r}") from exc
    raise ParameterError(f"not a number: {value!r}")


@dataclass(frozen=True)
class SimilarityParams:
    """Validated similarity parameters; pieces are numbered ``1..n`` in words."""

    a: tuple[float, ...]
    d: tuple[float, ...]
    beta: tuple[float, ...]
    name: str | None = field(default=None, compare=False)
    # exact (a, d) when every one of them was given as a rational
    exact: tuple[tuple[Fraction, ...], tuple[Fraction, ...]] | None = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        n = len(self.a)
        if n < 2 or len(self.d) != n or len(self.beta) != n:
            raise ParameterError("a, d, beta must be lists of equal length n > 1")
        if any(not math.isfinite(v) for v in (*self.a, *self.d, *self.beta)):
            raise ParameterError("parameters must be finite")
        if any(ak <= 0 for ak in self.a):
            raise ParameterError("every a_k must be positive")
        if abs(math.fsum(self.a) - 1.0) > SUM_TOL:
            raise ParameterError(f"sum of a_k is {math.fsum(self.a)!r}, expected 1")
        if self.contraction_factor >= 1.0:
            raise ParameterError(
                f"non-contractive: sum a_k d_k^2 = {self.contraction_factor!r} >= 1"
            )

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def alpha(self) -> tuple[float, ...]:
        """Breakpoints ``0 = alpha[0] < ... < alpha[n] = 1``."""
        acc = [0.0]
        for k in range(self.n - 1):
            acc.append(math.fsum(self.a[: k + 1]))
        acc.append(1.0)
        return tuple(acc)

    @property
    def contraction_factor(self) -> float:
        return math.fsum(ak * dk * dk for ak, dk in zip(self.a, self.d))

    @property
    def margin(self) -> float:
        return 1.0 - self.contraction_factor

    @property
    def ratios(self) -> tuple[float, ...]:
        """``a_k |d_k|`` per piece."""
        return tuple(ak * abs(dk) for ak, dk in zip(self.a, self.d))

    def as_dict(self) -> dict:
        return {"a": list(self.a), "d": list(self.d), "beta": list(self.beta)}


def validate_params(
    a: Sequence, d: Sequence, beta: Sequence, *, normalize: bool = False, name: str | None = None
) -> SimilarityParams:
    """Build :class:`SimilarityParams` from raw lists.

    Entries may be numbers or exact strings like ``"1/3"``. With
    ``normalize=True`` the lengths are rescaled to sum to one; otherwise a sum
    off by more than 1e-12 is rejected.
    """
    if not (len(a) == len(d) == len(beta)):
        raise ParameterError("a, d, beta must have equal length")
    ra = [parse_number(v) for v in a]
    rd = [parse_number(v) for v in d]
    rb = [parse_number(v) for v in beta]
    if normalize:
        total = sum(ra)
        if total <= 0:
            raise ParameterError("cannot normalize non-positive lengths")
        ra = [v / total for v in ra]
    exact = None
    if all(isinstance(v, Fraction) for v in (*ra, *rd)):
        exact = (tuple(ra), tuple(rd))
    return SimilarityParams(
        a=tuple(float(v) for v in ra),
        d=tuple(float(v) for v in rd),
        beta=tuple(float(v) for v in rb),
        name=name,
        exact=exact,
    )


# ---------------------------------------------------------------- moments

def global_moments(p: SimilarityParams) -> tuple[float, float]:
    """Return ``(M0, M1) = (int P, int x P)`` from the fixed-point relation."""
    a, d, b = np.array(p.a), np.array(p.d), np.array(p.beta)
    alpha = np.array(p.alpha)
    m0 = float(np.dot(a, b) / (1.0 - np.dot(a, d)))
    num = 0.5 * np.dot(b, alpha[1:] ** 2 - alpha[:-1] ** 2) + m0 * np.dot(d * a, alpha[:-1])
    m1 = float(num / (1.0 - np.dot(d, a * a)))
    return m0, m1


@dataclass(frozen=True)
class CellWord:
    """Word ``(k_1, ..., k_m)`` naming the cell ``G_{k_1} o ... o G_{k_m}([0, 1])``.

    Letters are 1-based piece numbers.
    """

    word: tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.word)


@dataclass(frozen=True)
class CellMoments:
    left: float
    length: float
    m0: float
    m1: float
    offset_b: float
    scale_d: float


def cell_moments(p: SimilarityParams, w: CellWord | Sequence[int]) -> CellMoments:
    word = w.word if isinstance(w, CellWord) else tuple(w)
    alpha = p.alpha
    left, h, B, delta = 0.0, 1.0, 0.0, 1.0
    for k in word:
        if not 1 <= k <= p.n:
            raise ParameterError(f"letter {k} outside 1..{p.n}")
        left += h * alpha[k - 1]
        B += delta * p.beta[k - 1]
        h *= p.a[k - 1]
        delta *= p.d[k - 1]
    M0, M1 = global_moments(p)
    mean = B + delta * M0
    return CellMoments(
        left=left,
        length=h,
        m0=h * mean,
        m1=h * left * mean + h * h * (0.5 * B + delta * M1),
        offset_b=B,
        scale_d=delta,
    )


@dataclass(frozen=True, eq=False)
class CellArrays:
    """All depth-m cells in left-to-right order, as flat arrays."""

    depth: int
    left: np.ndarray
    length: np.ndarray
    offset_b: np.ndarray
    scale_d: np.ndarray
    m0: np.ndarray
    m1: np.ndarray

    def __len__(self) -> int:
        return self.left.size


def _two_sum(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = x + y
    yy = s - x
    err = (x - (s - yy)) + (y - yy)
    return s, err


def depth_cells(p: SimilarityParams, depth: int) -> CellArrays:
    """Vectorised :func:`cell_moments` over every word of length ``depth``."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    a, d, b = np.array(p.a), np.array(p.d), np.array(p.beta)
    alpha = np.array(p.alpha[:-1])
    left, err = np.zeros(1), np.zeros(1)
    h, B, delta = np.ones(1), np.zeros(1), np.ones(1)
    for _ in range(depth):
        step = (h[:, None] * alpha[None, :]).ravel()
        base = np.repeat(left, p.n)
        left, e = _two_sum(base, step)
        err = np.repeat(err, p.n) + e
        B = (B[:, None] + delta[:, None] * b[None, :]).ravel()
        h = (h[:, None] * a[None, :]).ravel()
        delta = (delta[:, None] * d[None, :]).ravel()
    left = left + err
    M0, M1 = global_moments(p)
    mean = B + delta * M0
    m0 = h * mean
    m1 = h * left * mean + h * h * (0.5 * B + delta * M1)
    return CellArrays(depth, left, h, B, delta, m0, m1)


# ------------------------------------------------------------- evaluation

def value_range(p: SimilarityParams, iters: int = 2000) -> tuple[float, float] | None:
    """Smallest interval invariant under ``v -> beta_k + d_k v``; ``None`` if unbounded.

    When every ``|d_k| < 1`` the fixed point is essentially bounded by it.
    """
    if max(abs(x) for x in p.d) >= 1.0:
        return None
    lo = hi = 0.0
    for _ in range(iters):
        cand = [bk + dk * v for bk, dk in zip(p.beta, p.d) for v in (lo, hi)]
        nlo, nhi = min(cand), max(cand)
        if nlo == lo and nhi == hi:
            break
        lo, hi = nlo, nhi
    return lo, hi


def _locate(alpha: Sequence[float], x: float) -> int:
    # breakpoint ties go to the left cell
    for k in range(1, len(alpha)):
        if x <= alpha[k]:
            return k - 1
    return len(alpha) - 2


def evaluate_at(p: SimilarityParams, x: float, depth: int) -> tuple[float, float]:
    """Cell mean of ``P`` around ``x`` after ``depth`` levels, with a sup-radius.

    Returns ``(B + Delta*M0, |Delta| * osc)``; the radius is infinite when the
    range of ``P`` is unbounded. Exact (radius 0) once a zero scaling is hit.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    alpha = p.alpha
    B, delta = 0.0, 1.0
    for _ in range(depth):
        k = _locate(alpha, x)
        x = min(max((x - alpha[k]) / p.a[k], 0.0), 1.0)
        B += delta * p.beta[k]
        delta *= p.d[k]
        if delta == 0.0:
            return B, 0.0
    M0, _ = global_moments(p)
    rng = value_range(p)
    if rng is None:
        return B + delta * M0, math.inf
    osc = max(rng[1] - M0, M0 - rng[0])
    return B + delta * M0, abs(delta) * osc


def evaluate(p: SimilarityParams, xs: np.ndarray, depth: int) -> np.ndarray:
    """Vectorised value part of :func:`evaluate_at` (same tie-break)."""
    x = np.asarray(xs, dtype=float).copy()
    alpha = np.array(p.alpha)
    a, d, b = np.array(p.a), np.array(p.d), np.array(p.beta)
    B = np.zeros_like(x)
    delta = np.ones_like(x)
    for _ in range(depth):
        k = np.clip(np.searchsorted(alpha, x, side="left") - 1, 0, p.n - 1)
        x = np.clip((x - alpha[k]) / a[k], 0.0, 1.0)
        B += delta * b[k]
        delta *= d[k]
    M0, _ = global_moments(p)
    return B + delta * M0


def apply_operator(p: SimilarityParams, f, x: np.ndarray) -> np.ndarray:
    """``G(f)`` evaluated at points ``x`` for a callable ``f`` on [0, 1]."""
    x = np.asarray(x, dtype=float)
    alpha = np.array(p.alpha)
    k = np.clip(np.searchsorted(alpha, x, side="left") - 1, 0, p.n - 1)
    a, d, b = np.array(p.a), np.array(p.d), np.array(p.beta)
    return b[k] + d[k] * f(np.clip((x - alpha[k]) / a[k], 0.0, 1.0))


# --------------------------------------------------------- spectral order

def has_positive_order(p: SimilarityParams) -> bool:
    return sum(dk != 0.0 for dk in p.d) >= 2 and any(bk != 0.0 for bk in p.beta)


def spectral_order(p: SimilarityParams) -> float:
    """Root ``D`` of ``sum (a_k |d_k|)^(D/2) = 1``, or 0 without positive order."""
    if not has_positive_order(p):
        return 0.0
    q = [r for r in p.ratios if r > 0.0]

    def upsilon(s: float) -> float:
        return math.fsum(r**s for r in q)

    # upsilon is strictly decreasing, > 1 near 0 and < 1 at s = 1
    lo, hi = 0.0, 1.0
    while hi - lo > 0.0:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if upsilon(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    s = lo if abs(upsilon(lo) - 1.0) <= abs(upsilon(hi) - 1.0) else hi
    return 2.0 * s


# ------------------------------------------------- arithmetic structure

@dataclass(frozen=True)
class ArithmeticStructure:
    nu: float | None
    l: tuple[int | None, ...]
    D: float
    J: float
    arithmetic: bool
    parity_condition: bool
    exact: bool = False
    # (a_k |d_k|)^(D/2) per piece, None where d_k = 0
    weights: tuple[float | None, ...] = ()
    signs: tuple[int, ...] = ()

    @property
    def max_lag(self) -> int:
        return max((lk for lk in self.l if lk is not None), default=0)


def _factor(n: int) -> dict[int, int] | None:
    if n > _FACTOR_LIMIT:
        return None
    out: dict[int, int] = {}
    f = 2
    while f * f <= n:
        while n % f == 0:
            out[f] = out.get(f, 0) + 1
            n //= f
        f += 1 if f == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _exact_lags(qs: list[Fraction]) -> tuple[list[int], float] | None | bool:
    """Lags and step for exact rational ratios.

    Returns ``(lags, nu)``, ``False`` when provably non-arithmetic, or ``None``
    when factoring is out of reach.
    """
    vecs = []
    for q in qs:
        fn, fd = _factor(q.numerator), _factor(q.denominator)
        if fn is None or fd is None:
            return None
        v = {pr: -e for pr, e in fn.items()}
        for pr, e in fd.items():
            v[pr] = v.get(pr, 0) + e
        vecs.append({pr: e for pr, e in v.items() if e})
    primes = sorted(set().union(*vecs))
    mats = [[v.get(pr, 0) for pr in primes] for v in vecs]
    ref = mats[0]
    g_ref = reduce(math.gcd, ref)
    base = [e // g_ref for e in ref]
    lags = []
    for row in mats:
        # row must be a positive integer multiple of base
        idx = next(i for i, e in enumerate(base) if e)
        if row[idx] % base[idx]:
            return False
        c = row[idx] // base[idx]
        if c <= 0 or [c * e for e in base] != row:
            return False
        lags.append(c)
    g = reduce(math.gcd, lags)
    lags = [c // g for c in lags]
    unit = math.fsum(e * math.log(pr) for e, pr in zip(base, primes))
    return lags, g * unit


def _convergent_lag(r: float, tol: float, max_den: int) -> tuple[int, int] | None:
    """First convergent ``p/q`` of ``r`` with ``|r q - p| <= tol``."""
    x = r
    h0, h1, k0, k1 = 0, 1, 1, 0
    for _ in range(64):
        ai = math.floor(x)
        h0, h1 = h1, ai * h1 + h0
        k0, k1 = k1, ai * k1 + k0
        if k1 > max_den:
            return None
        if abs(r * k1 - h1) <= tol:
            return h1, k1
        frac = x - ai
        if frac == 0.0:
            return h1, k1
        x = 1.0 / frac
    return None


def _float_lags(xs: list[float], tol: float, max_den: int) -> tuple[list[int], float] | None:
    ref = min(xs)
    fracs = []
    for x in xs:
        pq = _convergent_lag(x / ref, tol, max_den)
        if pq is None:
            return None
        fracs.append(pq)
    Q = reduce(lambda u, v: u * v // math.gcd(u, v), (q for _, q in fracs))
    if Q > max_den:
        return None
    ns = [pn * (Q // q) for pn, q in fracs]
    g = reduce(math.gcd, ns)
    lags = [v // g for v in ns]
    if max(lags) > max_den:
        return None
    nu = math.fsum(lk * x for lk, x in zip(lags, xs)) / math.fsum(lk * lk for lk in lags)
    return lags, nu


def arithmetic_structure(
    p: SimilarityParams, tol: float = 1e-9, *, max_denominator: int = MAX_DENOMINATOR
) -> ArithmeticStructure:
    """Detect the step ``nu`` and lags ``l_k`` with ``a_k|d_k| = exp(-l_k nu)``.

    Exact rational parameters are decided by prime factorisation; otherwise
    ratios of logarithms are reconstructed by continued fractions (a
    heuristic: denominators capped at ``max_denominator``, each lag integral
    within ``tol``). The step found is the maximal one for *these*
    parameters; another parametrisation of the same function may differ.
    """
    if not 0.0 < tol <= 1e-3:
        raise ValueError("tol must lie in (0, 1e-3]")
    D = spectral_order(p)
    q = p.ratios
    active = [k for k in range(p.n) if q[k] > 0.0]
    signs = tuple(int(np.sign(dk)) for dk in p.d)
    weights = tuple(q[k] ** (D / 2) if q[k] > 0 else None for k in range(p.n))
    if not active:
        return ArithmeticStructure(None, (None,) * p.n, D, 0.0, False, False, False, weights, signs)

    found = None
    exact = False
    if p.exact is not None:
        ea, ed = p.exact
        res = _exact_lags([ea[k] * abs(ed[k]) for k in active])
        if res is False:
            found, exact = None, True
        elif res is not None:
            found, exact = res, True
    if found is None and not exact:
        xs = [-math.log(q[k]) for k in active]
        found = _float_lags(xs, tol, max_denominator)
        if found is not None:
            lags, nu = found
            if any(abs(q[k] - math.exp(-lk * nu)) > tol * q[k] for k, lk in zip(active, lags)):
                found = None

    if found is None:
        return ArithmeticStructure(None, (None,) * p.n, D, 0.0, False, False, exact, weights, signs)
    lags, nu = found
    l: list[int | None] = [None] * p.n
    for k, lk in zip(active, lags):
        l[k] = lk
    J = math.fsum(l[k] * weights[k] for k in active)
    parity = any(
        (p.d[k] > 0 and l[k] % 2 == 1) or (p.d[k] < 0 and l[k] % 2 == 0) for k in active
    )
    return ArithmeticStructure(nu, tuple(l), D, J, True, parity, exact, weights, signs)


# ------------------------------------------------------------- catalog

_R5 = math.sqrt(5.0)
BUILTIN_NAMES = ("cantor", "P_a_delta", "tilde_P", "hat_P", "linear_1", "linear_2", "linear_3")


def _p_a_delta(a, delta, name):
    one = Fraction(1) if isinstance(a, Fraction) and isinstance(delta, Fraction) else 1.0
    half = one / 2
    return validate_params(
        [a, one - 2 * a, a],
        [half + delta, -2 * delta, half + delta],
        [0 * one, half + delta, half - delta],
        name=name,
    )


def builtin(name: str, *params) -> SimilarityParams:
    """Catalog weights; ``params`` may be numbers or exact strings."""
    vals = [parse_number(v) for v in params]
    if name == "cantor":
        return _p_a_delta(Fraction(1, 3), Fraction(0), "cantor")
    if name == "hat_P":
        return validate_params(
            [Fraction(1, 3)] * 3,
            [Fraction(1, 2), Fraction(0), Fraction(1, 2)],
            [Fraction(0), Fraction(2, 5), Fraction(1, 2)],
            name="hat_P",
        )
    if name == "P_a_delta":
        if len(vals) != 2:
            raise ParameterError("P_a_delta takes two parameters (a, delta)")
        a, delta = vals
        if not 0 < a < 0.5:
            raise ParameterError("P_a_delta requires a in (0, 1/2)")
        if not 0 <= delta < Fraction(1, 3):
            raise ParameterError("P_a_delta requires delta in [0, 1/3)")
        return _p_a_delta(a, delta, f"P_a_delta({a},{delta})")
    if name == "tilde_P":
        if len(vals) != 1:
            raise ParameterError("tilde_P takes one parameter a")
        (a,) = vals
        if not 0 < a < Fraction(1, 3):
            raise ParameterError("tilde_P requires a in (0, 1/3)")
        delta = a / (2 * (2 - 5 * a))
        return _p_a_delta(a, delta, f"tilde_P({a})")
    if name == "linear_1":
        h = Fraction(1, 2)
        return validate_params([h, h], [h, h], [0, h], name=name)
    if name == "linear_2":
        s, t = (3 - _R5) / 2, (_R5 - 1) / 2
        # keep the lengths summing to one in floating point
        t = 1.0 - s
        return validate_params([s, t], [s, t], [0.0, s], name=name)
    if name == "linear_3":
        return validate_params(
            [Fraction(1, 3), Fraction(2, 3)],
            [Fraction(1, 3), Fraction(2, 3)],
            [0, Fraction(1, 3)],
            name=name,
        )
    raise ParameterError(f"unknown builtin {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def parse_builtin(spec: str) -> SimilarityParams:
    """``"tilde_P:0.2"`` or ``"P_a_delta:1/3,0"`` style catalog references."""
    name, _, rest = spec.partition(":")
    params = [s for s in rest.split(",") if s.strip()] if rest else []
    return builtin(name.strip(), *params)
