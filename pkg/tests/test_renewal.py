import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fractal_sl.renewal import (
    HypothesisError,
    RenewalSystem,
    WeightedSequence,
    fold_period,
    grid_steps,
    recursion_residual,
    solve_continuous,
    solve_coupled,
    solve_scalar,
)


def brute(u, v, xs, n_max):
    """Plain loops, no numpy: the defining recursion verbatim."""
    comps = len(xs)
    z = [[0.0] * (n_max + 1) for _ in range(comps)]
    for n in range(n_max + 1):
        for j in range(comps):
            acc = xs[j][n] if n < len(xs[j]) else 0.0
            for k in range(1, min(len(u), n) + 1):
                acc += u[k - 1] * z[j][n - k]
                if comps == 2:
                    acc += v[k - 1] * z[1 - j][n - k]
            z[j][n] = acc
    return z


@st.composite
def scalar_systems(draw):
    N = draw(st.integers(1, 6))
    w = draw(st.lists(st.floats(0.0, 1.0), min_size=N, max_size=N))
    if N == 1:
        w = [1.0]
    w[0] = max(w[0], 0.05)  # u_1 > 0 keeps the gcd at one
    u = [x / math.fsum(w) for x in w]
    u[0] = 1.0 - math.fsum(u[1:])
    x = draw(st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=8))
    return RenewalSystem(tuple(u)), x


@st.composite
def coupled_systems(draw):
    N = draw(st.integers(1, 5))
    wu = draw(st.lists(st.floats(0.0, 1.0), min_size=N, max_size=N))
    wv = draw(st.lists(st.floats(0.0, 1.0), min_size=N, max_size=N))
    wu[0] = max(wu[0], 0.05)
    wv[0] = max(wv[0], 0.05)
    tot = math.fsum(wu) + math.fsum(wv)
    u = [x / tot for x in wu]
    v = [x / tot for x in wv]
    v[0] = 1.0 - math.fsum(u) - math.fsum(v[1:])
    x1 = draw(st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=6))
    x2 = draw(st.lists(st.floats(-2.0, 2.0), min_size=1, max_size=6))
    return RenewalSystem(tuple(u), tuple(v), coupled=True), x1, x2


# ------------------------------------------------------------------ scalar

def test_pure_shift():
    sol = solve_scalar(RenewalSystem((1.0,)), WeightedSequence.delta(), 50)
    assert np.all(sol.z[0] == 1.0)
    assert sol.limit == 1.0


def test_half_half():
    sol = solve_scalar(RenewalSystem((0.5, 0.5)), [1.0], 10_000)
    assert sol.z[0][:4] == pytest.approx([1, 0.5, 0.75, 0.625])
    assert sol.limit == pytest.approx(2 / 3, abs=1e-15)
    ref = brute([0.5, 0.5], [0.0, 0.0], [[1.0]], 10_000)[0]
    assert np.max(np.abs(sol.z[0] - ref)) <= 1e-9
    assert abs(sol.z[0][-1] - sol.limit) <= 1e-9


def test_gcd_rejected():
    with pytest.raises(HypothesisError) as exc:
        solve_scalar(RenewalSystem((0.0, 1.0)), [1.0], 10)
    assert exc.value.clause == "gcd"


@pytest.mark.parametrize(
    "u, clause",
    [((0.5, 0.4), "normalization"), ((1.2, -0.2), "nonnegativity"), ((), "support")],
)
def test_scalar_clauses(u, clause):
    with pytest.raises(HypothesisError) as exc:
        RenewalSystem(u).check()
    assert exc.value.clause == clause


def test_weighted_sequence_norm():
    assert WeightedSequence((1.0, -2.0, 3.0), r=2.0).norm == pytest.approx(1 + 4 + 12)
    with pytest.raises(ValueError):
        WeightedSequence((1.0,), r=0.0)


@given(scalar_systems())
def test_scalar_matches_brute_force(case):
    sys, x = case
    sol = solve_scalar(sys, x, 400)
    ref = brute(list(sys.u), list(sys.v), [x], 400)[0]
    assert np.max(np.abs(sol.z[0] - np.array(ref))) <= 1e-9
    assert sol.limit == pytest.approx(math.fsum(x) / sys.J, abs=1e-12)
    assert recursion_residual(sys, [x], sol) <= 1e-12 * (1 + np.max(np.abs(sol.z[0])))


def test_slow_mixing_diagnostic():
    sol = solve_scalar(RenewalSystem((0.5, 0.5)), [1.0, 0.25], 5)
    assert sol.diagnostic is not None
    quiet = solve_scalar(RenewalSystem((0.5, 0.5)), [1.0], 200)
    assert quiet.diagnostic is None


# ----------------------------------------------------------------- coupled

def test_coupled_hand_example():
    sys = RenewalSystem((0.5,), (0.5,), coupled=True)
    sol = solve_coupled(sys, [1.0], [0.0], 20)
    assert sol.z[0][:4] == pytest.approx([1, 0.5, 0.5, 0.5])
    assert sol.z[1][:4] == pytest.approx([0, 0.5, 0.5, 0.5])
    assert sol.limit == 0.5


def test_coupled_parity_rejected():
    with pytest.raises(HypothesisError) as exc:
        solve_coupled(RenewalSystem((0.0,), (1.0,), coupled=True), [1.0], [0.0], 10)
    assert exc.value.clause == "parity"


def test_coupled_two_lag_example():
    sys = RenewalSystem((0.0, 0.25), (0.5, 0.25), coupled=True)
    sol = solve_coupled(sys, [1.0], [1.0], 10_000)
    assert sol.limit == pytest.approx(2 / 3, abs=1e-15)
    ref = brute([0.0, 0.25], [0.5, 0.25], [[1.0], [1.0]], 10_000)
    for z, r in zip(sol.z, ref):
        assert np.max(np.abs(z - np.array(r))) <= 1e-9
        assert abs(z[-1] - 2 / 3) <= 1e-9


def test_coupled_needs_cross_mass():
    with pytest.raises(HypothesisError) as exc:
        solve_coupled(RenewalSystem((1.0,), (0.0,), coupled=True), [1.0], [0.0], 10)
    assert exc.value.clause == "cross-coupling"


def test_scalar_with_v_rejected():
    with pytest.raises(HypothesisError) as exc:
        solve_scalar(RenewalSystem((0.5,), (0.5,)), [1.0], 10)
    assert exc.value.clause == "scalar"


def test_scalar_embedding_limit():
    # v = eps -> 0: the coupled pair approaches the scalar solution
    eps = 1e-6
    x1, x2 = [1.0, 0.3], [0.2]
    cpl = solve_coupled(RenewalSystem((0.5, 0.5 - eps), (0.0, eps), coupled=True), x1, x2, 60)
    s1 = solve_scalar(RenewalSystem((0.5, 0.5)), x1, 60)
    s2 = solve_scalar(RenewalSystem((0.5, 0.5)), x2, 60)
    assert np.max(np.abs(cpl.z[0] - s1.z[0])) <= 1e-4
    assert np.max(np.abs(cpl.z[1] - s2.z[0])) <= 1e-4


@given(coupled_systems())
def test_coupled_matches_brute_force_and_swaps(case):
    sys, x1, x2 = case
    sol = solve_coupled(sys, x1, x2, 300)
    ref = brute(list(sys.u), list(sys.v), [x1, x2], 300)
    for z, r in zip(sol.z, ref):
        assert np.max(np.abs(z - np.array(r))) <= 1e-9
    swapped = solve_coupled(sys, x2, x1, 300)
    assert np.array_equal(swapped.z[0], sol.z[1])
    assert np.array_equal(swapped.z[1], sol.z[0])
    assert swapped.limit == sol.limit
    assert sol.limit == pytest.approx(0.5 * (math.fsum(x1) + math.fsum(x2)) / sys.J, abs=1e-12)
    assert recursion_residual(sys, [x1, x2], sol) <= 1e-12 * (1 + np.max(np.abs(sol.z)))


# -------------------------------------------------------------- continuous

def bump(t, tau=1.0):
    t = np.asarray(t, dtype=float)
    return np.where(t > 0, t * np.exp(-tau * np.maximum(t, 0)), 0.0)


def bilateral(t, tau=1.0, kmax=400):
    """``sum_{k in Z} X(t - k)`` by direct summation."""
    return sum(bump(t - k, tau) for k in range(-kmax, kmax + 1))


def test_grid_steps():
    assert grid_steps(0.01) == 100
    assert grid_steps(1 / 3) == 3
    with pytest.raises(ValueError):
        grid_steps(0.3)
    with pytest.raises(ValueError):
        solve_continuous(RenewalSystem((1.0,)), bump, 5.0, 0.3)


def test_shift_kernel_bilateral():
    sol = solve_continuous(RenewalSystem((1.0,)), bump, 40.0, 0.01)
    # Z is the one-sided sum, s the full bilateral sum
    one_sided = sum(bump(sol.t - k) for k in range(0, 41))
    assert np.max(np.abs(sol.z[0] - one_sided)) <= 1e-12
    theta = np.arange(100) / 100
    assert np.max(np.abs(sol.profile - bilateral(theta))) <= 1e-10
    assert sol.gap <= 1e-10


def test_zero_forcing():
    sol = solve_continuous(RenewalSystem((0.5, 0.5)), lambda t: 0 * t, 10.0, 0.1)
    assert not np.any(sol.z[0]) and not np.any(sol.profile)


def test_coupled_continuous():
    sys = RenewalSystem((0.5,), (0.5,), coupled=True)
    sol = solve_continuous(sys, (bump, lambda t: 0 * t), 40.0, 0.01)
    theta = np.arange(100) / 100
    assert np.max(np.abs(sol.profile - 0.5 * bilateral(theta))) <= 1e-10
    assert sol.gap <= 1e-10


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("u", [(1.0,), (0.5, 0.5), (0.2, 0.3, 0.5)])
def test_gap_decay(tau, u):
    sol = solve_continuous(RenewalSystem(u), lambda t: bump(t, tau), 40.0, 0.02)
    assert sol.gap < 1e-6
    assert sol.limit == pytest.approx(float(np.mean(sol.profile)))


def test_continuous_residual():
    sys = RenewalSystem((0.3, 0.7))
    Q = 50
    sol = solve_continuous(sys, bump, 12.0, 1 / Q)
    x = bump(sol.t)
    z = sol.z[0]
    rhs = x.copy()
    rhs[Q:] += 0.3 * z[:-Q]
    rhs[2 * Q:] += 0.7 * z[: -2 * Q]
    assert np.max(np.abs(z - rhs)) <= 1e-12


def test_fold_period():
    assert fold_period(np.arange(7.0), 3).tolist() == [9.0, 5.0, 7.0]
