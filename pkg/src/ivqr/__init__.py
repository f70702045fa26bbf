"""Instrumental-variables quantile regression via smoothed estimating equations.

The indicator inside the quantile moment conditions is replaced by a
piecewise-linear ramp over a data-driven bandwidth, which turns the problem
into a smooth root-finding exercise: fast to solve, and with enough
regularity for plug-in bandwidths and kernel-based standard errors.
"""

from ivqr.bandwidth import (
    BandwidthCandidates,
    BandwidthReport,
    PluginFit,
    b_star,
    fit_with_plugin,
    kde_f0,
    kde_fprime0,
    plug_in_bandwidth,
    robust_sigma,
    s_star,
)
from ivqr.estimate import DEFAULT_SEED, fit
from ivqr.exceptions import (
    ConvergenceError,
    EstimationError,
    RankDeficientError,
    SingularMatrixError,
)
from ivqr.inference import CovarianceEstimate, analytic_covariance, bayesian_bootstrap
from ivqr.model import (
    EstimationProblem,
    FitResult,
    build_problem,
    convert_quantile,
    unsmoothed_moments,
)
from ivqr.projection import (
    ProjectedInstruments,
    iv_estimate,
    least_squares,
    project_instruments,
)
from ivqr.simulation import (
    DgpSpec,
    EstimatorSettings,
    MonteCarloRow,
    brute_force_qr_oracle,
    generate,
    monte_carlo,
    monte_carlo_to_csv,
    reference_dgp,
    winsorized_mean_oracle,
)
from ivqr.smoothing import SmoothingConstants, itilde, itilde_deriv, smoothing_constants
from ivqr.solver import (
    SeeSolution,
    SolverDiagnostics,
    see_jacobian,
    see_residual,
    solve_see,
    tol_residual,
)

__version__ = "0.1.0"

__all__ = [
    "BandwidthCandidates",
    "BandwidthReport",
    "ConvergenceError",
    "CovarianceEstimate",
    "DEFAULT_SEED",
    "DgpSpec",
    "EstimationError",
    "EstimationProblem",
    "EstimatorSettings",
    "FitResult",
    "MonteCarloRow",
    "PluginFit",
    "ProjectedInstruments",
    "RankDeficientError",
    "SeeSolution",
    "SingularMatrixError",
    "SmoothingConstants",
    "SolverDiagnostics",
    "analytic_covariance",
    "b_star",
    "bayesian_bootstrap",
    "brute_force_qr_oracle",
    "build_problem",
    "convert_quantile",
    "fit",
    "fit_with_plugin",
    "generate",
    "iv_estimate",
    "kde_f0",
    "kde_fprime0",
    "least_squares",
    "monte_carlo",
    "monte_carlo_to_csv",
    "plug_in_bandwidth",
    "project_instruments",
    "reference_dgp",
    "robust_sigma",
    "s_star",
    "see_jacobian",
    "see_residual",
    "smoothing_constants",
    "solve_see",
    "tol_residual",
    "unsmoothed_moments",
    "winsorized_mean_oracle",
]
