"""Proportional-fair bandwidth split and the equal-split baseline."""

from __future__ import annotations

import math

import numpy as np

from netorch.errors import InfeasibleInput
from netorch.solvers.problems import Allocation, BandwidthProblem

OUTER_ITERS = 200
INNER_ITERS = 200
_SERIES_X = 1e-4


def rates(problem: BandwidthProblem, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    c = problem.effective_snr
    out = np.zeros_like(b)
    pos = b > 0
    out[pos] = b[pos] * np.log1p(c[pos] / b[pos]) / math.log(2.0)
    return out


def pf_utility(problem: BandwidthProblem, b) -> float:
    """Sum of log rates; every share must be positive and the split feasible."""
    b = np.asarray(b, dtype=float).ravel()
    if b.shape[0] != problem.K:
        raise InfeasibleInput(f"allocation has {b.shape[0]} entries, expected {problem.K}")
    if np.any(b <= 0) or not np.all(np.isfinite(b)):
        raise InfeasibleInput("every bandwidth share must be positive")
    if b.sum() > problem.total_bw * (1 + 1e-9):
        raise InfeasibleInput("allocation exceeds total bandwidth")
    return float(np.sum(np.log(rates(problem, b))))


def marginal_utility(c, b) -> np.ndarray:
    """d/db ln(b log2(1 + c/b)) = (1/b) (1 - x / ((1+x) ln(1+x))), x = c/b."""
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    x = c / b
    small = x < _SERIES_X
    xs = np.where(small, 1.0, x)
    ratio = xs / ((1.0 + xs) * np.log1p(xs))
    # 1 - ratio cancels badly for tiny x: x/2 - 5x^2/12 + 3x^3/8
    series = x * (0.5 - x * (5.0 / 12.0 - x * 0.375))
    return np.where(small, series, 1.0 - ratio) / b


def _shares_for(c: np.ndarray, lam: float, hi: float) -> np.ndarray:
    """Solve U_k'(b_k) = lam for every k by bisection on (0, hi]."""
    lo_b = np.zeros_like(c)
    hi_b = np.full_like(c, hi)
    for _ in range(INNER_ITERS):
        mid = 0.5 * (lo_b + hi_b)
        if np.all((mid == lo_b) | (mid == hi_b)):
            break
        too_small = marginal_utility(c, mid) > lam  # share still below the root
        lo_b = np.where(too_small, mid, lo_b)
        hi_b = np.where(too_small, hi_b, mid)
    return 0.5 * (lo_b + hi_b)


def solve_bandwidth_pf(problem: BandwidthProblem, tol: float = 1e-9) -> Allocation:
    problem.validate()
    if tol <= 0:
        raise ValueError("tol must be positive")
    B, c, K = float(problem.total_bw), problem.effective_snr, problem.K
    if K == 1:
        b = np.array([B])
        return Allocation(b, pf_utility(problem, b), {"outer_iterations": 0, "kkt_residual": 0.0})

    # lam_lo forces every share <= B with one share == B; lam_hi forces every share <= B/K
    lam_lo = float(np.max(marginal_utility(c, np.full(K, B))))
    lam_hi = float(np.max(marginal_utility(c, np.full(K, B / K))))
    it = 0
    for it in range(1, OUTER_ITERS + 1):
        lam = 0.5 * (lam_lo + lam_hi)
        if lam in (lam_lo, lam_hi):
            break
        total = _shares_for(c, lam, B).sum()
        if total > B:
            lam_lo = lam
        else:
            lam_hi = lam
    lam = 0.5 * (lam_lo + lam_hi)
    b = _shares_for(c, lam, B)
    mu = marginal_utility(c, b)
    resid = float((mu.max() - mu.min()) / lam)
    diagnostics = {
        "outer_iterations": it,
        "multiplier": lam,
        "kkt_residual": resid,
        "budget_error": float(b.sum() - B),
    }
    return Allocation(b, pf_utility(problem, b), diagnostics)


def solve_bandwidth_equal(problem: BandwidthProblem) -> Allocation:
    if problem.K < 1:
        raise ValueError("need at least one UE")
    b = np.full(problem.K, problem.total_bw / problem.K)
    try:
        value = pf_utility(problem, b)
    except InfeasibleInput:
        value = float("nan")
    return Allocation(b, value, {})
