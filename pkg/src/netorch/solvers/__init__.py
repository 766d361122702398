"""Case-study optimizers, their baselines and evaluation metrics."""

from netorch.solvers.bandwidth import (
    marginal_utility,
    pf_utility,
    rates,
    solve_bandwidth_equal,
    solve_bandwidth_pf,
)
from netorch.solvers.metrics import geometric_mean, jain_index
from netorch.solvers.power import (
    maxprod_gradient,
    maxprod_objective,
    projected_gradient_norm,
    sinr_all,
    solve_power_maxmin,
    solve_power_maxprod,
    solve_power_uniform,
    solve_power_waterfilling,
    solve_waterfilling,
    sum_log_sinr,
)
from netorch.solvers.problems import Allocation, BandwidthProblem, PowerProblem

__all__ = [
    "Allocation",
    "BandwidthProblem",
    "PowerProblem",
    "geometric_mean",
    "jain_index",
    "marginal_utility",
    "maxprod_gradient",
    "maxprod_objective",
    "pf_utility",
    "projected_gradient_norm",
    "rates",
    "sinr_all",
    "solve_bandwidth_equal",
    "solve_bandwidth_pf",
    "solve_power_maxmin",
    "solve_power_maxprod",
    "solve_power_uniform",
    "solve_power_waterfilling",
    "solve_waterfilling",
    "sum_log_sinr",
]
