import math
import time

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netorch.errors import InfeasibleInput, InvalidProblem
from netorch.solvers import (
    BandwidthProblem,
    jain_index,
    marginal_utility,
    pf_utility,
    solve_bandwidth_equal,
    solve_bandwidth_pf,
)
from netorch.errors import AllZero


def utility_direct(c, b):
    return sum(math.log(bk * math.log2(1 + ck / bk)) for ck, bk in zip(c, b))


def grid_oracle_two_users(c, B, n=100_000):
    b1 = np.linspace(0, B, n + 2)[1:-1]
    b2 = B - b1
    u = np.log(b1 * np.log2(1 + c[0] / b1)) + np.log(b2 * np.log2(1 + c[1] / b2))
    i = int(np.argmax(u))
    return b1[i], float(u[i])


def test_symmetric_split():
    alloc = solve_bandwidth_pf(BandwidthProblem(100, [10, 10]))
    np.testing.assert_allclose(alloc.values, [50, 50], atol=1e-9)


def test_two_user_grid_oracle():
    c, B = (50.0, 200.0), 100.0
    b1_star, u_star = grid_oracle_two_users(c, B)
    alloc = solve_bandwidth_pf(BandwidthProblem(B, c))
    assert abs(alloc.values[0] - b1_star) <= 0.01
    assert abs(alloc.objective_value - u_star) <= 1e-6 * abs(u_star)
    assert alloc.objective_value >= u_star - 1e-12


def test_twenty_users_feasible(rng):
    c = rng.uniform(0.5, 500, size=20)
    alloc = solve_bandwidth_pf(BandwidthProblem(100, c))
    assert abs(alloc.values.sum() - 100) <= 1e-7
    assert np.all(alloc.values > 0)
    assert alloc.diagnostics["kkt_residual"] <= 1e-9


def test_marginal_utility_finite_differences(rng):
    # central differences of ln R (50-digit arithmetic) against the closed form
    mpmath.mp.dps = 50
    for _ in range(100):
        c = mpmath.mpf(float(10 ** rng.uniform(-2, 3)))
        b = mpmath.mpf(float(10 ** rng.uniform(-1, 2)))
        h = b * mpmath.mpf("1e-12")
        f = lambda x: mpmath.log(x * mpmath.log(1 + c / x) / mpmath.log(2))  # noqa: E731
        fd = (f(b + h) - f(b - h)) / (2 * h)
        assert float(marginal_utility(float(c), float(b))) == pytest.approx(float(fd), rel=1e-6)


def test_marginal_utility_series_branch():
    # x = c/b below the series threshold, checked against high-precision values
    mpmath.mp.dps = 50
    for c, b in [(1e-3, 100.0), (5e-6, 1.0), (1e-9, 3.0)]:
        x = mpmath.mpf(c) / b
        exact = (1 - x / ((1 + x) * mpmath.log(1 + x))) / b
        assert float(marginal_utility(c, b)) == pytest.approx(float(exact), rel=1e-10)


def test_marginal_utility_decreasing():
    b = np.linspace(0.01, 100, 2000)
    mu = marginal_utility(25.0, b)
    assert np.all(mu > 0)
    assert np.all(np.diff(mu) < 0)


def test_equal_split():
    assert np.all(solve_bandwidth_equal(BandwidthProblem(100, np.ones(20))).values == 5)
    assert solve_bandwidth_equal(BandwidthProblem(7, [3.0])).values.tolist() == [7]
    np.testing.assert_allclose(solve_bandwidth_equal(BandwidthProblem(1, [1, 2, 3])).values, 1 / 3, atol=1e-15)


def test_pf_utility_values():
    P = BandwidthProblem(100, [10])
    assert pf_utility(P, [100]) == pytest.approx(math.log(100 * math.log2(1 + 10 / 100)), rel=1e-15)
    P = BandwidthProblem(100, [10, 10])
    assert pf_utility(P, [50, 50]) == pytest.approx(2 * math.log(50 * math.log2(1.2)), rel=1e-15)
    with pytest.raises(InfeasibleInput):
        pf_utility(P, [0, 100])
    with pytest.raises(InfeasibleInput):
        pf_utility(P, [60, 60])


@settings(max_examples=60, deadline=None)
@given(
    c=st.lists(st.floats(0.01, 1e4), min_size=1, max_size=25),
    B=st.floats(0.5, 1e3),
)
def test_pf_dominates_equal(c, B):
    P = BandwidthProblem(B, c)
    pf = solve_bandwidth_pf(P)
    eq = solve_bandwidth_equal(P)
    assert abs(pf.values.sum() - B) <= B * 1e-9
    assert pf.objective_value >= pf_utility(P, eq.values) - 1e-9 * abs(pf.objective_value)
    assert pf.objective_value == pytest.approx(utility_direct(c, pf.values), rel=1e-12, abs=1e-12)


def test_invalid_problems():
    for bad in (BandwidthProblem(0, [1]), BandwidthProblem(10, [1, 0]), BandwidthProblem(10, [])):
        with pytest.raises(InvalidProblem):
            solve_bandwidth_pf(bad)


def test_deterministic():
    P = BandwidthProblem(100, np.linspace(1, 50, 20))
    assert solve_bandwidth_pf(P).values.tobytes() == solve_bandwidth_pf(P).values.tobytes()


def test_jain_index():
    assert jain_index([1, 1, 1, 1]) == 1.0
    assert jain_index([1, 0, 0, 0]) == 0.25
    assert jain_index([3, 1]) == pytest.approx(16 / 20, abs=1e-15)
    with pytest.raises(AllZero):
        jain_index([0, 0])
