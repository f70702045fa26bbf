"""Tests for the smoothed-equation residual, Jacobian, and homotopy solver.

Oracles used here:
  * math.fsum recomputation of the residual from an independently coded ramp,
  * central finite differences for the Jacobian (away from window edges),
  * the closed-form root at bandwidths wide enough that the system is linear,
  * the winsorized-mean characterization in the intercept-only case.
"""

import math
import re

import numpy as np
import pytest

import ivqr.solver as solver_mod
from ivqr.model import EstimationProblem, build_problem
from ivqr.exceptions import ConvergenceError
from ivqr.projection import iv_estimate, project_instruments
from ivqr.simulation import winsorized_mean_oracle
from ivqr.solver import (
    MAX_ESCALATIONS,
    SeeSolution,
    SolverDiagnostics,
    see_jacobian,
    see_residual,
    solve_see,
    tol_residual,
)


def make_problem(n=120, seed=1, tau=0.5, weights="uniform"):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)
    d = z + 0.5 * rng.normal(size=n)
    y = 1.0 + d + rng.normal(size=n)
    w = rng.uniform(0.5, 2.0, size=n) if weights == "random" else None
    return build_problem(y, raw_endog=d, raw_instr=z, weights=w, quantile=tau)


def intercept_problem(y, tau=0.5):
    y = np.asarray(y, dtype=float)
    X = np.ones((y.shape[0], 1))
    return EstimationProblem(y=y, X=X, Z=X, w=np.ones(y.shape[0]), tau=tau)


# ---------------------------------------------------------------- residual


def ramp_longhand(u):
    if u <= -1.0:
        return 1.0
    if u >= 1.0:
        return 0.0
    return (1.0 - u) / 2.0


def test_residual_matches_fsum_oracle():
    prob = make_problem(seed=6, tau=0.3, weights="random")
    zhat = project_instruments(prob)
    beta = np.array([0.7, 1.4])
    h = 0.9
    got = see_residual(prob, zhat, beta, h)
    for k in range(prob.p):
        terms = []
        for i in range(prob.n):
            v = prob.y[i] - float(prob.X[i] @ beta)
            terms.append(
                prob.w[i] * zhat.Zhat[i, k] * (ramp_longhand(v / h) - prob.tau)
            )
        assert got[k] == pytest.approx(math.fsum(terms) / prob.n, abs=1e-14)


def test_residual_at_root_is_zero_for_wide_window():
    prob = make_problem(seed=2)
    zhat = project_instruments(prob)
    beta_iv = iv_estimate(prob, zhat)
    h = float(np.max(np.abs(prob.y - prob.X @ beta_iv))) + 5.0
    g = see_residual(prob, zhat, beta_iv, h)
    assert np.max(np.abs(g)) < 1e-12


# ---------------------------------------------------------------- jacobian


def test_jacobian_matches_finite_differences():
    prob = make_problem(seed=10, tau=0.4, weights="random")
    zhat = project_instruments(prob)
    beta = np.array([0.8, 1.2])
    h = 1.3
    eps = 1e-6
    # keep clear of window edges: the FD step moves each v by at most
    # eps * max|x|, so require every |v| to sit away from h by more than that
    v = prob.y - prob.X @ beta
    margin = eps * float(np.max(np.abs(prob.X))) * 10
    assert np.min(np.abs(np.abs(v) - h)) > margin, "bad test instance"
    J = see_jacobian(prob, zhat, beta, h)
    for j in range(prob.p):
        e = np.zeros(prob.p)
        e[j] = eps
        fd = (
            see_residual(prob, zhat, beta + e, h)
            - see_residual(prob, zhat, beta - e, h)
        ) / (2 * eps)
        np.testing.assert_allclose(J[:, j], fd, rtol=1e-5, atol=1e-10)


def test_jacobian_zero_outside_window():
    prob = make_problem(seed=3)
    zhat = project_instruments(prob)
    beta = np.array([1.0, 1.0])
    # tiny bandwidth placed between residuals: no observation in the window
    v = np.abs(prob.y - prob.X @ beta)
    h = float(np.min(v)) / 2.0
    J = see_jacobian(prob, zhat, beta, h)
    assert np.all(J == 0.0)


# ------------------------------------------------------- linear-regime root


def test_wide_bandwidth_median_root_is_iv_estimate():
    # with every residual inside the window and tau = 1/2, the equations are
    # linear with the same solution as linear IV
    prob = make_problem(seed=4, weights="random")
    zhat = project_instruments(prob)
    beta_iv = iv_estimate(prob, zhat)
    h_big = float(np.max(np.abs(prob.y - prob.X @ beta_iv))) + 1.0
    sol = solve_see(prob, zhat, 3.0 * h_big)
    np.testing.assert_allclose(sol.beta, beta_iv, rtol=1e-9, atol=1e-12)
    assert sol.h_used == 3.0 * h_big
    assert sol.diag.converged
    assert sol.diag.bandwidth_escalations == 0


def test_wide_bandwidth_quantile_shift_hits_intercept_only():
    # in the linear regime the tau root differs from the median root by
    # 2 h (tau - 1/2) in the intercept coordinate and nowhere else
    base = make_problem(seed=12)
    zhat = project_instruments(base)
    beta_iv = iv_estimate(base, zhat)
    h = 2.0 * (float(np.max(np.abs(base.y - base.X @ beta_iv))) + 1.0)
    roots = {}
    for tau in (0.25, 0.5, 0.75):
        prob = EstimationProblem(
            y=base.y, X=base.X, Z=base.Z, w=base.w, tau=tau, endog_idx=base.endog_idx
        )
        roots[tau] = solve_see(prob, zhat, h).beta
    # slopes agree across quantiles to solver precision
    assert roots[0.25][0] == pytest.approx(roots[0.5][0], rel=1e-8)
    assert roots[0.75][0] == pytest.approx(roots[0.5][0], rel=1e-8)
    # intercept moves by exactly 2h(tau - 1/2)
    assert roots[0.75][1] - roots[0.5][1] == pytest.approx(0.5 * h, rel=1e-7)
    assert roots[0.25][1] - roots[0.5][1] == pytest.approx(-0.5 * h, rel=1e-7)


# -------------------------------------------------- winsorized-mean oracle


@pytest.mark.parametrize("tau", [0.3, 0.5, 0.62])
def test_intercept_only_solution_is_winsorized_mean(tau):
    rng = np.random.default_rng(77)
    y = rng.normal(size=51)  # odd count keeps the root unique at small h
    prob = intercept_problem(y, tau=tau)
    zhat = project_instruments(prob)
    sol = solve_see(prob, zhat, 0.25)
    oracle = winsorized_mean_oracle(y, sol.h_used, tau)
    assert sol.beta[0] == pytest.approx(oracle, abs=1e-6)


def test_intercept_only_various_bandwidths():
    rng = np.random.default_rng(123)
    y = rng.normal(size=33) * 2.0 + 0.4
    prob = intercept_problem(y)
    zhat = project_instruments(prob)
    for h in (0.1, 0.5, 2.0, 10.0):
        sol = solve_see(prob, zhat, h)
        oracle = winsorized_mean_oracle(y, sol.h_used, 0.5)
        assert sol.beta[0] == pytest.approx(oracle, abs=1e-6), f"h={h}"


# ------------------------------------------------------------ equivariance


def test_affine_equivariance():
    prob = make_problem(seed=30)
    zhat = project_instruments(prob)
    h = 0.8
    sol = solve_see(prob, zhat, h)
    assert sol.h_used == h
    a, c = 2.5, np.array([1.5, -3.0])
    y2 = a * prob.y + prob.X @ c
    prob2 = EstimationProblem(
        y=y2, X=prob.X, Z=prob.Z, w=prob.w, tau=prob.tau, endog_idx=prob.endog_idx
    )
    sol2 = solve_see(prob2, project_instruments(prob2), a * h)
    assert sol2.h_used == a * h
    np.testing.assert_allclose(sol2.beta, a * sol.beta + c, rtol=1e-6, atol=1e-7)


def test_weight_doubling_matches_row_duplication():
    rng = np.random.default_rng(55)
    n = 40
    z = rng.normal(size=n)
    d = z + 0.4 * rng.normal(size=n)
    y = 1.0 + d + rng.normal(size=n)
    w = np.ones(n)
    w[:7] = 2.0
    prob_w = build_problem(y, raw_endog=d, raw_instr=z, weights=w, quantile=0.5)
    idx = np.concatenate([np.arange(n), np.arange(7)])
    prob_dup = build_problem(y[idx], raw_endog=d[idx], raw_instr=z[idx], quantile=0.5)
    h = 1.0
    b_w = solve_see(prob_w, project_instruments(prob_w), h).beta
    b_dup = solve_see(prob_dup, project_instruments(prob_dup), h).beta
    np.testing.assert_allclose(b_w, b_dup, atol=1e-6)


# ------------------------------------------------------------- determinism


def test_solver_bitwise_deterministic():
    prob = make_problem(seed=61, weights="random")
    zhat = project_instruments(prob)
    s1 = solve_see(prob, zhat, 0.4)
    s2 = solve_see(prob, zhat, 0.4)
    assert np.array_equal(s1.beta, s2.beta)
    assert s1.h_used == s2.h_used
    assert s1.diag == s2.diag


# -------------------------------------------------------------- escalation


def tiny_bandwidth_problem(seed):
    rng = np.random.default_rng(seed)
    n = 20
    z = rng.normal(size=n)
    d = z + 0.5 * rng.normal(size=n)
    y = 1.0 + d + rng.normal(size=n)
    return build_problem(y, raw_endog=d, raw_instr=z, quantile=0.5)


def test_tiny_request_escalates_but_still_solves():
    # this instance tracks an exact-fit vertex far below machine-noise scale
    # before escalation kicks in; whatever bandwidth is reported, the
    # returned beta must solve the equations there
    prob = tiny_bandwidth_problem(90)
    zhat = project_instruments(prob)
    sol = solve_see(prob, zhat, 1e-12)
    assert sol.diag.converged
    assert sol.h_used > 1e-12
    assert sol.diag.bandwidth_escalations >= 1
    gn = np.max(np.abs(see_residual(prob, zhat, sol.beta, sol.h_used)))
    assert gn <= tol_residual(prob, zhat)


def test_exhausted_escalation_returns_best_converged():
    # this instance cannot be solved below a macroscopic bandwidth: the
    # attempt budget runs out and the smallest converged stage comes back
    prob = tiny_bandwidth_problem(8)
    zhat = project_instruments(prob)
    sol = solve_see(prob, zhat, 1e-12)
    assert sol.diag.converged
    assert sol.diag.bandwidth_escalations == MAX_ESCALATIONS
    assert sol.h_used > 0.01
    gn = np.max(np.abs(see_residual(prob, zhat, sol.beta, sol.h_used)))
    assert gn <= tol_residual(prob, zhat)


def test_zero_request_means_smallest_feasible():
    prob = make_problem(n=80, seed=91)
    zhat = project_instruments(prob)
    sol = solve_see(prob, zhat, 0.0)
    assert sol.diag.converged
    assert 0.0 < sol.h_used < np.inf


def test_reported_bandwidth_is_refittable_directly():
    # the fallback floor lies on the deterministic halving grid, so asking
    # for exactly that bandwidth replays the same stages and must succeed
    # without escalating
    rng = np.random.default_rng(92)
    n = 24
    z = rng.normal(size=n)
    d = z + 0.5 * rng.normal(size=n)
    y = 1.0 + d + rng.normal(size=n)
    prob = build_problem(y, raw_endog=d, raw_instr=z, quantile=0.5)
    zhat = project_instruments(prob)
    sol = solve_see(prob, zhat, 0.0)
    again = solve_see(prob, zhat, sol.h_used)
    assert again.diag.converged
    assert again.diag.bandwidth_escalations == 0
    assert again.h_used == sol.h_used
    assert np.array_equal(again.beta, sol.beta)


def test_warm_start_skips_homotopy():
    prob = make_problem(seed=93)
    zhat = project_instruments(prob)
    cold = solve_see(prob, zhat, 0.7)
    warm = solve_see(prob, zhat, 0.7, beta_init=cold.beta)
    assert warm.diag.converged
    assert warm.h_used == 0.7
    assert warm.diag.homotopy_stages == 1
    assert warm.diag.bandwidth_escalations == 0
    np.testing.assert_allclose(warm.beta, cold.beta, atol=1e-9)


def test_beta_init_length_checked():
    prob = make_problem()
    zhat = project_instruments(prob)
    with pytest.raises(ValueError, match="beta_init"):
        solve_see(prob, zhat, 1.0, beta_init=[1.0, 2.0, 3.0])


@pytest.mark.parametrize("bad", [-1.0, np.nan, np.inf])
def test_bad_bandwidth_request_rejected(bad):
    prob = make_problem()
    zhat = project_instruments(prob)
    with pytest.raises(ValueError, match="h_request"):
        solve_see(prob, zhat, bad)


def test_convergence_error_when_nothing_converges(monkeypatch):
    prob = make_problem(n=30, seed=94)
    zhat = project_instruments(prob)

    def always_fail(prob_, zhat_, beta0, h, tol, log=None):
        return np.asarray(beta0, dtype=float), 1, False, np.inf

    monkeypatch.setattr(solver_mod, "_damped_newton", always_fail)
    with pytest.raises(ConvergenceError) as exc:
        solve_see(prob, zhat, 0.5)
    diag = exc.value.diagnostics
    assert isinstance(diag, SolverDiagnostics)
    assert not diag.converged
    assert diag.bandwidth_escalations == MAX_ESCALATIONS


# ------------------------------------------------------------------- trace


def test_log_sink_receives_iteration_lines():
    prob = make_problem(seed=95)
    zhat = project_instruments(prob)
    lines = []
    solve_see(prob, zhat, 0.5, log=lines.append)
    assert lines, "expected at least one trace line"
    pat = re.compile(r"^h=[0-9.e+-]+ iter=\d+ resid_inf=[0-9.e+-]+ step=[0-9.e+-]+$")
    assert all(pat.match(s) for s in lines)


def test_solution_container_is_frozen():
    prob = make_problem(seed=96)
    zhat = project_instruments(prob)
    sol = solve_see(prob, zhat, 1.0)
    assert isinstance(sol, SeeSolution)
    with pytest.raises(AttributeError):
        sol.h_used = 2.0
