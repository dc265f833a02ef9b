import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrt_oneshot import core
from qrt_oneshot.config import TOL
from qrt_oneshot.conic import (ConicProgram, Model, ProgramError, SolverFailure, inner, solve_lp,
                               solve_sdp)

seeds = st.integers(0, 2**32 - 1)


def _random_lp(seed, n=5, m=3):
    rng = np.random.default_rng(seed)
    # a row of ones keeps the feasible region bounded; b comes from a positive point
    A = np.vstack([np.ones(n), rng.standard_normal((m - 1, n))])
    x0 = rng.random(n) + 0.1
    return rng.standard_normal(n), A, A @ x0


def test_min_eigenvalue_program():
    rng = np.random.default_rng(1)
    c = core.random_density(3, rng) - 0.3 * np.eye(3)
    m = Model()
    X = m.psd(3)
    m.add_eq(X.trace(), 1.0)
    m.minimize(inner(c, X).real)
    res = m.solve()
    assert res.objective == pytest.approx(core.min_eig(c), abs=1e-7)


def test_dmax_of_equal_states_is_boundary_one():
    rho = np.eye(2) / 2
    m = Model()
    lam = m.nonneg()
    m.add_psd(lam * rho - rho)
    m.minimize(lam)
    assert m.solve().objective == pytest.approx(1.0, abs=1e-7)


def test_infeasible_program_exposes_certificate():
    # x >= 0 with x1 + x2 = -1 has no solution
    p = ConicProgram(c=[1.0, 1.0], A=[[1.0, 1.0]], b=[-1.0], n_nonneg=2)
    rep = solve_lp(p)
    assert rep.status == "infeasible"
    y = rep.certificate
    assert y is not None and float(p.b @ y) > 0
    assert np.all(p.A.T @ y <= 1e-9)


def test_infeasible_sdp_is_reported():
    m = Model()
    X = m.psd(2)
    m.add_eq(X.trace(), -1.0)
    m.minimize(X.trace())
    assert m.solve(require_optimal=False).status == "infeasible"


def test_iteration_cap_surfaces_as_status():
    rng = np.random.default_rng(4)
    c = core.random_density(4, rng)
    m = Model(TOL.replace(solver_max_iter=1))
    X = m.psd(4)
    m.add_eq(X.trace(), 1.0)
    m.minimize(inner(c, X).real)
    res = m.solve(require_optimal=False)
    assert res.status == "max_iter"
    with pytest.raises(SolverFailure):
        m.solve()


def test_malformed_programs_are_rejected():
    with pytest.raises(ProgramError):
        ConicProgram(c=[1.0], A=[[1.0, 2.0]], b=[1.0], n_nonneg=1)
    with pytest.raises(ProgramError):
        ConicProgram(c=[], A=np.zeros((0, 0)), b=[])


@given(seeds)
def test_lp_matches_degenerate_sdp(seed):
    c, A, b = _random_lp(seed)
    lp = solve_lp(ConicProgram(c, A, b, n_nonneg=len(c)))
    sdp = solve_sdp(ConicProgram(c, A, b, blocks=[1] * len(c)))
    assert lp.status == sdp.status == "optimal"
    assert abs(lp.objective - sdp.objective) <= 1e-7


@given(seeds)
def test_optimal_reports_meet_residual_contract(seed):
    rng = np.random.default_rng(seed)
    rho, sigma = core.random_density(3, rng), core.random_density(3, rng)
    m = Model()
    lam = m.nonneg()
    m.add_psd(lam * sigma - rho)
    m.minimize(lam)
    rep = m.solve().report
    assert rep.eq_residual <= TOL.eq_tol * 10
    assert rep.min_block_eig >= -TOL.psd_tol
    assert rep.gap <= TOL.opt_tol * max(1.0, abs(rep.objective))


def test_identical_programs_are_bit_identical():
    c, A, b = _random_lp(9)
    first = solve_sdp(ConicProgram(c, A, b, blocks=[1] * len(c)))
    second = solve_sdp(ConicProgram(c, A, b, blocks=[1] * len(c)))
    assert first.objective == second.objective
    assert np.array_equal(first.x, second.x)
