"""Damped-Newton solver for the smoothed estimating equations.

The target system in beta is

    0 = (1/n) sum_i w_i zhat_i [ itilde((y_i - x_i'beta) / h) - tau ]

solved by Newton steps with a backtracking line search on the Euclidean norm
of the residual.  Small bandwidths are reached by a bandwidth homotopy: start
where the system is globally linear, halve toward the request, and warm-start
each stage from the last.  If a requested bandwidth cannot be solved the
target is escalated geometrically until the solve succeeds or the attempt
budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ivqr.exceptions import ConvergenceError
from ivqr.model import EstimationProblem
from ivqr.projection import ProjectedInstruments, iv_estimate
from ivqr.smoothing import itilde

MAX_NEWTON_ITER = 200
MAX_BACKTRACK = 30
MAX_ESCALATIONS = 40
ESCALATION_FACTOR = 1.5


@dataclass
class SolverDiagnostics:
    iterations: int = 0
    final_residual_inf_norm: float = float("nan")
    bandwidth_escalations: int = 0
    converged: bool = False
    homotopy_stages: int = 0


@dataclass(frozen=True)
class SeeSolution:
    beta: np.ndarray
    h_used: float
    diag: SolverDiagnostics


def see_residual(prob: EstimationProblem, zhat: ProjectedInstruments, beta, h) -> np.ndarray:
    """Smoothed sample moment vector at ``beta`` with bandwidth ``h``."""
    beta = np.asarray(beta, dtype=float).ravel()
    v = prob.y - prob.X @ beta
    t = itilde(v / h) - prob.tau
    return zhat.Zhat.T @ (prob.w * t) / prob.n


def see_jacobian(prob: EstimationProblem, zhat: ProjectedInstruments, beta, h) -> np.ndarray:
    """Derivative of :func:`see_residual` with respect to ``beta``.

    Only observations strictly inside the smoothing window contribute; the
    ramp has slope -1/2 there, which combined with the inner derivative
    -x_i/h gives (1/(2nh)) sum over the window of w_i zhat_i x_i'.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    v = prob.y - prob.X @ beta
    inside = np.abs(v) < h
    wm = prob.w * inside
    return (zhat.Zhat * wm[:, None]).T @ prob.X / (2.0 * prob.n * h)


def tol_residual(prob: EstimationProblem, zhat: ProjectedInstruments) -> float:
    """Convergence tolerance, scaled by the weighted instrument means."""
    scale = np.max(np.abs(zhat.Zhat.T @ prob.w / prob.n))
    return 1e-8 * (1.0 + scale)


def _damped_newton(prob, zhat, beta0, h, tol, log=None):
    """Newton iteration at fixed bandwidth.

    Returns (beta, n_iterations, converged, final_inf_norm).  Fails (without
    raising) on a singular Jacobian, a non-finite step, or a line search that
    cannot reduce the residual norm after MAX_BACKTRACK halvings.
    """
    beta = np.asarray(beta0, dtype=float).copy()
    g = see_residual(prob, zhat, beta, h)
    for it in range(MAX_NEWTON_ITER):
        gn = float(np.max(np.abs(g)))
        if gn <= tol:
            return beta, it, True, gn
        J = see_jacobian(prob, zhat, beta, h)
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            return beta, it, False, gn
        if not np.all(np.isfinite(step)):
            return beta, it, False, gn
        g2 = float(np.linalg.norm(g))
        lam = 1.0
        accepted = False
        for _ in range(MAX_BACKTRACK + 1):
            cand = beta + lam * step
            gc = see_residual(prob, zhat, cand, h)
            if np.all(np.isfinite(gc)) and float(np.linalg.norm(gc)) < g2:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return beta, it + 1, False, gn
        beta, g = cand, gc
        if log is not None:
            log(
                f"h={h:.8g} iter={it + 1} resid_inf={float(np.max(np.abs(g))):.3e} "
                f"step={float(np.linalg.norm(lam * step)):.3e}"
            )
    gn = float(np.max(np.abs(g)))
    return beta, MAX_NEWTON_ITER, gn <= tol, gn


def solve_see(
    prob: EstimationProblem,
    zhat: ProjectedInstruments,
    h_request: float,
    beta_init=None,
    log=None,
) -> SeeSolution:
    """Solve the smoothed estimating equations at (or as close as feasible to)
    the requested bandwidth.

    The homotopy starts at a bandwidth wide enough that every observation sits
    inside the smoothing window (there the system is linear in beta and one
    Newton step lands on the root), then halves the bandwidth toward the
    request, warm-starting each stage from the last.  If a stage fails, the
    target is escalated by a factor of 1.5 and the descent resumes from the
    smallest bandwidth that has converged so far, up to 40 escalations.  When
    the budget runs out the solution at that smallest converged bandwidth is
    returned; ``h_used`` always reports the bandwidth the returned beta
    actually solves.

    ``h_request = 0`` asks for the smallest numerically feasible bandwidth:
    the descent targets the smallest positive normal float and stops wherever
    the stages stop converging.

    When ``beta_init`` is given the solver first tries a direct Newton solve
    at the requested bandwidth from that point (the warm-start path used for
    refinement and bootstrap replications); if the direct solve fails it
    falls back to the full homotopy.
    """
    h_request = float(h_request)
    if not np.isfinite(h_request) or h_request < 0:
        raise ValueError(f"h_request must be a finite nonnegative number, got {h_request}")
    tol = tol_residual(prob, zhat)
    start0 = iv_estimate(prob, zhat)
    resid0 = prob.y - prob.X @ start0
    h_big = float(np.max(np.abs(resid0))) + 1.0
    target0 = h_request if h_request > 0 else float(np.finfo(float).tiny)

    best_h = None
    best_beta = None
    iters_total = 0
    stages_total = 0

    if beta_init is not None:
        warm = np.asarray(beta_init, dtype=float).ravel()
        if warm.shape[0] != prob.p:
            raise ValueError(f"beta_init has length {warm.shape[0]}, expected {prob.p}")
        cand, nit, ok, gn = _damped_newton(prob, zhat, warm, target0, tol, log)
        iters_total += nit
        stages_total += 1
        if ok:
            diag = SolverDiagnostics(
                iterations=iters_total,
                final_residual_inf_norm=gn,
                bandwidth_escalations=0,
                converged=True,
                homotopy_stages=stages_total,
            )
            return SeeSolution(beta=np.array(cand), h_used=target0, diag=diag)

    for k in range(MAX_ESCALATIONS + 1):
        target = target0 * ESCALATION_FACTOR**k
        if best_h is None:
            cur = start0
            seq = [max(target, h_big)]
            while seq[-1] > target:
                seq.append(max(seq[-1] / 2.0, target))
        elif best_h <= target:
            cur = best_beta
            seq = [target]
        else:
            cur = best_beta
            seq = []
            h = best_h
            while h > target:
                h = max(h / 2.0, target)
                seq.append(h)
        ok_all = True
        gn_final = np.inf
        for h_s in seq:
            cand, nit, ok, gn = _damped_newton(prob, zhat, cur, h_s, tol, log)
            iters_total += nit
            stages_total += 1
            if not ok:
                ok_all = False
                break
            cur = cand
            gn_final = gn
            if best_h is None or h_s < best_h:
                best_h, best_beta = h_s, cur
        if ok_all:
            diag = SolverDiagnostics(
                iterations=iters_total,
                final_residual_inf_norm=gn_final,
                bandwidth_escalations=k,
                converged=True,
                homotopy_stages=stages_total,
            )
            return SeeSolution(beta=np.array(cur), h_used=float(target), diag=diag)

    if best_h is not None:
        gn_best = float(np.max(np.abs(see_residual(prob, zhat, best_beta, best_h))))
        diag = SolverDiagnostics(
            iterations=iters_total,
            final_residual_inf_norm=gn_best,
            bandwidth_escalations=MAX_ESCALATIONS,
            converged=True,
            homotopy_stages=stages_total,
        )
        return SeeSolution(beta=np.array(best_beta), h_used=float(best_h), diag=diag)

    diag = SolverDiagnostics(
        iterations=iters_total,
        final_residual_inf_norm=np.inf,
        bandwidth_escalations=MAX_ESCALATIONS,
        converged=False,
        homotopy_stages=stages_total,
    )
    raise ConvergenceError(
        f"smoothed estimating equations did not converge at any bandwidth within "
        f"{MAX_ESCALATIONS} escalations of the request h={h_request:g}",
        diagnostics=diag,
    )
