"""Multi-cell downlink power control.

SINR of UE (j, k) under powers p (L, K):

    a_jk p_jk / (sum_{(l,i) != (j,k)} beta_{l->(j,k)} p_li + noise)

Max-min runs bisection on a common SINR target with a standard interference
fixed point as the feasibility oracle. Max-product is projected gradient
ascent on q = log p, where the objective is concave.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import wrightomega

from netorch.errors import InvalidProblem, NonConvergence
from netorch.solvers.problems import Allocation, PowerProblem, as_power_matrix

FIXED_POINT_ITERS = 10_000
FIXED_POINT_RTOL = 1e-10
BISECTION_ITERS = 200
MAXPROD_ITERS = 5_000
FLOOR_FRACTION = 1e-12
ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
LINE_SEARCH_ITERS = 60


def _interference(problem: PowerProblem, p: np.ndarray) -> np.ndarray:
    """Interference seen by every UE, shape (L, K)."""
    L, K = problem.L, problem.K
    per_bs = p.sum(axis=1)
    total = (problem.cross_gain.T @ per_bs).reshape(L, K)
    intf = total - problem.own_gain * p
    return np.maximum(intf, 0.0)


def sinr_all(problem: PowerProblem, p) -> np.ndarray:
    p = as_power_matrix(problem, p)
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    return problem.signal_gain * p / (_interference(problem, p) + problem.noise)


def sum_log_sinr(problem: PowerProblem, p) -> float:
    return float(np.sum(np.log(sinr_all(problem, p))))


# ---------------------------------------------------------------- max-min


def _min_powers_for_target(problem: PowerProblem, t: float) -> tuple[np.ndarray | None, int]:
    """Minimal powers giving every UE SINR t, or None if a budget is exceeded.

    Iterates p <- t (I(p) + noise) / a from p = 0. The iterates increase
    monotonically, so crossing a budget proves infeasibility early.
    """
    a, noise, cap = problem.signal_gain, problem.noise, problem.p_max
    p = np.zeros_like(a)
    for it in range(1, FIXED_POINT_ITERS + 1):
        new = t * (_interference(problem, p) + noise) / a
        if np.any(new.sum(axis=1) > cap):
            return None, it
        change = np.max(np.abs(new - p) / np.maximum(new, np.finfo(float).tiny))
        p = new
        if change <= FIXED_POINT_RTOL:
            return p, it
    raise NonConvergence(
        f"fixed point did not converge for target {t:.6g}",
        {"target": t, "iterations": FIXED_POINT_ITERS},
    )


def solve_power_maxmin(problem: PowerProblem, tol: float = 1e-10) -> Allocation:
    problem.validate()
    if tol <= 0:
        raise ValueError("tol must be positive")
    # every UE alone at full budget: no common target can exceed the weakest
    t_hi = float(np.min(problem.signal_gain * problem.p_max / problem.noise))
    t_lo = 0.0
    fp_iters = 0
    p_best, n = _min_powers_for_target(problem, t_hi)
    fp_iters += n
    bis = 0
    if p_best is not None:
        t_lo = t_hi
    else:
        for bis in range(1, BISECTION_ITERS + 1):
            t = 0.5 * (t_lo + t_hi)
            p, n = _min_powers_for_target(problem, t)
            fp_iters += n
            if p is None:
                t_hi = t
            else:
                t_lo, p_best = t, p
            if t_lo > 0 and t_hi - t_lo <= tol * t_lo:
                break
        else:
            raise NonConvergence(
                "bisection cap reached",
                {"t_lo": t_lo, "t_hi": t_hi, "bisection_iterations": bis},
            )
    sinr = sinr_all(problem, p_best)
    diagnostics = {
        "t_star": t_lo,
        "t_upper": t_hi,
        "bisection_iterations": bis,
        "fixed_point_iterations": fp_iters,
        "sinr_spread": float((sinr.max() - sinr.min()) / sinr.min()),
        "max_budget_use": float(p_best.sum(axis=1).max() / problem.p_max),
    }
    return Allocation(p_best, t_lo, diagnostics)


# ------------------------------------------------------------ max-product


def maxprod_objective(problem: PowerProblem, q: np.ndarray) -> float:
    """sum_u log SINR_u(exp(q))."""
    p = np.exp(q)
    return float(np.sum(np.log(problem.signal_gain) + q - np.log(_interference(problem, p) + problem.noise)))


def maxprod_gradient(problem: PowerProblem, q: np.ndarray) -> np.ndarray:
    """Gradient of :func:`maxprod_objective` with respect to q.

    d f / d q_v = 1 - p_v * sum_{u != v} beta_{bs(v) -> u} / D_u, where D_u is
    the interference-plus-noise of UE u.
    """
    L, K = problem.L, problem.K
    p = np.exp(q)
    w = 1.0 / (_interference(problem, p) + problem.noise)
    per_bs = problem.cross_gain @ w.ravel()  # (L,)
    seen = per_bs[:, None] - problem.own_gain * w
    return 1.0 - p * np.maximum(seen, 0.0)


def _project_log_budget(y: np.ndarray, p_max: float, q_floor: float) -> np.ndarray:
    """Euclidean projection (in q) onto {q >= q_floor, sum_k exp(q_jk) <= p_max} per row.

    With multiplier mu the solution is q_k = max(q_floor, y_k - W(mu e^{y_k})),
    i.e. x_k = e^{q_k} solves x e^{mu x} = e^{y_k}. The row budget is convex
    and decreasing in mu, so Newton from mu = 0 approaches the root from the
    left without overshooting.
    """
    q = np.maximum(y, q_floor)
    p_floor = math.exp(q_floor)
    over = np.exp(q).sum(axis=1) > p_max
    if not np.any(over):
        return q
    yr = y[over]
    mu = np.zeros(yr.shape[0])
    x = np.exp(yr)
    for _ in range(100):
        xc = np.maximum(x, p_floor)
        h = xc.sum(axis=1) - p_max
        active = x > p_floor
        dh = -np.sum(np.where(active, x * x / (1.0 + mu[:, None] * x), 0.0), axis=1)
        step = np.where(dh < 0, -h / np.where(dh < 0, dh, -1.0), 0.0)
        mu_new = np.maximum(mu + step, 0.0)
        done = np.all(np.abs(h) <= 1e-15 * p_max) or np.all(mu_new == mu)
        mu = mu_new
        pos = mu > 0
        x = np.where(
            pos[:, None],
            wrightomega(np.log(np.where(pos, mu, 1.0))[:, None] + yr) / np.where(pos, mu, 1.0)[:, None],
            np.exp(yr),
        )
        if done:
            break
    qr = np.maximum(np.log(np.maximum(x, p_floor)), q_floor)
    # guard the last ulp so the budget holds
    excess = np.exp(qr).sum(axis=1) / p_max
    qr = qr - np.log(np.maximum(excess, 1.0))[:, None]
    q[over] = np.maximum(qr, q_floor)
    return q


def projected_gradient_norm(problem: PowerProblem, p) -> float:
    """|| Proj(q + grad f(q)) - q || at q = log p (unit-step gradient mapping)."""
    p = as_power_matrix(problem, p)
    q = np.log(p)
    q_floor = math.log(FLOOR_FRACTION * problem.p_max)
    g = maxprod_gradient(problem, q)
    return float(np.linalg.norm(_project_log_budget(q + g, problem.p_max, q_floor) - q))


def solve_power_maxprod(problem: PowerProblem, tol: float = 1e-7) -> Allocation:
    problem.validate()
    if tol <= 0:
        raise ValueError("tol must be positive")
    p_max = problem.p_max
    q_floor = math.log(FLOOR_FRACTION * p_max)
    project = lambda y: _project_log_budget(y, p_max, q_floor)  # noqa: E731

    q = project(np.full((problem.L, problem.K), math.log(p_max / problem.K)))
    f = maxprod_objective(problem, q)
    g = maxprod_gradient(problem, q)
    step = 1.0
    pg_norm = float("inf")
    it = 0
    for it in range(1, MAXPROD_ITERS + 1):
        pg_norm = float(np.linalg.norm(project(q + g) - q))
        if pg_norm <= tol:
            break
        s = step
        for _ in range(LINE_SEARCH_ITERS):
            q_new = project(q + s * g)
            f_new = maxprod_objective(problem, q_new)
            if f_new >= f + ARMIJO_C * float(np.sum(g * (q_new - q))):
                break
            s *= ARMIJO_SHRINK
        else:
            raise NonConvergence(
                "line search failed",
                {"iterations": it, "projected_gradient_norm": pg_norm},
            )
        g_new = maxprod_gradient(problem, q_new)
        # Barzilai-Borwein guess for the next trial step
        dq, dg = q_new - q, g_new - g
        curv = -float(np.sum(dq * dg))
        step = float(np.clip(np.sum(dq * dq) / curv, 1e-8, 1e8)) if curv > 0 else 1.0
        q, f, g = q_new, f_new, g_new
    else:
        raise NonConvergence(
            "max-product iteration cap reached",
            {"iterations": MAXPROD_ITERS, "projected_gradient_norm": pg_norm},
        )
    p = np.exp(q)
    diagnostics = {"iterations": it, "projected_gradient_norm": pg_norm}
    return Allocation(p, f, diagnostics)


# -------------------------------------------------------------- baselines


def solve_power_uniform(problem: PowerProblem) -> Allocation:
    p = np.full((problem.L, problem.K), problem.p_max / problem.K)
    return Allocation(p, float(np.min(sinr_all(problem, p))), {})


def solve_waterfilling(gains, noise: float, p_total: float, tol: float = 1e-12) -> np.ndarray:
    """p_k = max(0, mu - noise / g_k) with sum p_k = p_total (mu by bisection)."""
    g = np.asarray(gains, dtype=float).ravel()
    if g.size == 0 or np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise InvalidProblem("gains must be positive")
    if not noise > 0 or not p_total > 0:
        raise InvalidProblem("noise and p_total must be positive")
    floor = noise / g
    lo = float(floor.min())
    hi = lo + p_total
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        total = np.maximum(0.0, mu - floor).sum()
        if abs(total - p_total) <= tol * p_total:
            break
        if total > p_total:
            hi = mu
        else:
            lo = mu
    return np.maximum(0.0, mu - floor)


def solve_power_waterfilling(problem: PowerProblem, tol: float = 1e-12) -> Allocation:
    """Per-cell water-filling on the coherent gains, ignoring all interference."""
    problem.validate()
    p = np.vstack(
        [solve_waterfilling(problem.signal_gain[j], problem.noise, problem.p_max, tol) for j in range(problem.L)]
    )
    return Allocation(p, float(np.min(sinr_all(problem, p))), {})
