"""High-level estimation pipeline shared by the CLI and the simulation harness."""

from __future__ import annotations

import numpy as np

from ivqr.bandwidth import BandwidthReport, fit_with_plugin
from ivqr.inference import analytic_covariance, bayesian_bootstrap
from ivqr.model import EstimationProblem, FitResult
from ivqr.projection import project_instruments
from ivqr.solver import solve_see

DEFAULT_SEED = 112358


def fit(
    prob: EstimationProblem,
    bandwidth: float | None = None,
    level: float = 0.95,
    reps: int = 0,
    seed: int = DEFAULT_SEED,
    beta_init=None,
    iteration_log=None,
    progress=None,
) -> FitResult:
    """Project instruments, solve the smoothed equations, and attach a VCE.

    ``bandwidth=None`` selects the plug-in rule with one refinement pass; a
    number requests that bandwidth directly (0 means the smallest feasible)
    and bypasses selection entirely.  ``reps=0`` uses the analytic sandwich
    covariance, ``reps >= 2`` the Bayesian bootstrap.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie strictly between 0 and 1, got {level}")
    zhat = project_instruments(prob)
    if bandwidth is None:
        beta, report, diag = fit_with_plugin(prob, zhat, beta_init=beta_init, log=iteration_log)
    else:
        sol = solve_see(prob, zhat, float(bandwidth), beta_init=beta_init, log=iteration_log)
        beta, diag = sol.beta, sol.diag
        report = BandwidthReport(h_requested=float(bandwidth), h_used=sol.h_used)
    if reps == 0:
        cov_est = analytic_covariance(prob, beta)
    else:
        cov_est = bayesian_bootstrap(
            prob, zhat, report.h_used, beta, reps=reps, seed=seed, progress=progress
        )
    return FitResult.from_covariance(
        beta=beta,
        cov=cov_est.cov,
        bandwidth=report,
        solver=diag,
        n_obs=prob.n,
        vcov_kind=cov_est.kind,
        level=level,
    )
