import json

import numpy as np
import pytest

from conftest import OMEGA, flat_harmonics, flat_setup, sphere_setup
from qpvar import fields as F
from qpvar import lagrangian as L
from qpvar import torus_spectral as ts
from qpvar.domain import SublevelDomain, check_hypotheses
from qpvar.manifolds import Sphere
from qpvar.solver import SolverConfig, flat_analytic_solution, minimize, verify

SOUTH = np.array([0.0, 0.0, -1.0])


@pytest.fixture(scope="module")
def flat_run():
    problem, D = flat_setup()
    cfg = SolverConfig(degree=8, residual_tol=1e-10, test_degree=8)
    return problem, cfg, minimize(problem, cfg, D)


@pytest.fixture(scope="module")
def sphere_run():
    problem, D = sphere_setup()
    cfg = SolverConfig(degree=6, points_per_dim=13, residual_tol=1e-9, test_degree=8)
    return problem, cfg, minimize(problem, cfg, D)


def l2_distance(problem, U, V):
    return np.sqrt(ts.grid_average(np.sum((U - V) ** 2, -1), problem.grid))


def test_flat_analytic_examples():
    u = flat_analytic_solution(1.0, [((1, 0), [0.0, 0, 0])], OMEGA, 3)
    assert np.max(np.abs(u.coefficients)) == 0
    u = flat_analytic_solution(1.0, [((1, 0), [1.0, 0, 0])], OMEGA, 3)
    # real amplitude of the cos(phi_1) mode: twice the stored coefficient
    assert np.allclose(2 * u.coefficient((1, 0)), [-0.5, 0, 0])
    assert np.allclose(ts.evaluate(u, [0.0, 0.0]), [-0.5, 0, 0])
    u = flat_analytic_solution(2.0, [((0, 0), [1.0, -2.0, 0])], OMEGA, 1)
    assert np.allclose(u.coefficient((0, 0)), [-0.5, 1.0, 0])
    with pytest.raises(ValueError):
        flat_analytic_solution(0.0, [], OMEGA, 2, 3)


def test_flat_analytic_residual_random(rng):
    for _ in range(5):
        harm = []
        for _ in range(4):
            n = tuple(int(c) for c in rng.integers(-3, 4, 2))
            harm.append((n, rng.standard_normal(3) + 1j * rng.standard_normal(3)))
        lam = rng.uniform(0.5, 3.0)
        W = F.flat_quadratic(lam, harm, 3, 2)
        problem = L.Problem(flat_setup()[0].manifold, OMEGA, W, ts.QuadratureGrid(2, 9))
        u = flat_analytic_solution(lam, harm, OMEGA, problem.degree)
        res, _ = L.weak_residual(problem, problem.from_poly(u), 4)
        assert res <= 1e-10


def test_flat_minimize_matches_oracle(flat_run):
    problem, cfg, (u, U, rep) = flat_run
    oracle = flat_analytic_solution(1.0, flat_harmonics(), OMEGA, problem.degree)
    assert l2_distance(problem, U, problem.from_poly(oracle)) <= 1e-8
    assert rep.converged and rep.final_residual <= 1e-10
    assert np.max(np.abs(u.coefficients - oracle.coefficients)) <= 1e-8


def test_degree_refinement():
    u4 = flat_analytic_solution(1.0, flat_harmonics(), OMEGA, 4)
    u8 = flat_analytic_solution(1.0, flat_harmonics(), OMEGA, 8)
    assert np.max(np.abs(u8.truncate(4).coefficients - u4.coefficients)) <= 1e-10
    sols = []
    for N in (4, 8):
        problem, D = flat_setup(P=2 * N + 1)
        sols.append(minimize(problem, SolverConfig(degree=N, residual_tol=1e-11), D)[0])
    assert np.max(np.abs(sols[1].truncate(4).coefficients - sols[0].coefficients)) <= 1e-10


def test_time_independent_sphere():
    problem, D = sphere_setup(amplitude=0.0, P=9)
    cfg = SolverConfig(degree=4, residual_tol=1e-9)
    # start from a nonconstant map inside the cap
    U0 = problem.manifold.retract_closest(SOUTH + 0.15 * np.cos(problem.nodes()[..., :1]) * np.array([1.0, 0, 0]))
    u, U, rep = minimize(problem, cfg, D, U0=U0)
    assert np.max(np.linalg.norm(U - SOUTH, axis=-1)) <= 1e-8
    assert rep.final_residual <= 1e-8


def test_sphere_forced_descent(sphere_run):
    problem, cfg, (u, U, rep) = sphere_run
    assert rep.final_residual <= 1e-6
    assert rep.min_domain_margin > 0
    J = np.asarray(rep.J_history)
    assert np.all(np.diff(J) <= 1e-12)
    assert rep.kinetic_norm2 <= rep.m_bound + 1e-8
    for p in rep.projections:
        assert p["J_after"] <= p["J_before"] + 1e-10
    assert rep.constraint_violation <= 1e-10


def test_report_json(tmp_path, sphere_run):
    _, _, (_, _, rep) = sphere_run
    path = tmp_path / "r.json"
    rep.write_json(path)
    data = json.loads(path.read_text())
    assert data["termination"] == rep.termination
    assert data["test_family"]["test_degree"] == 8


def test_line_search_failure_reported():
    problem, D = sphere_setup(P=9)
    _, _, rep = minimize(problem, SolverConfig(degree=4, max_backtracks=0), D)
    assert rep.termination == "line_search_failure"


def test_momentum_variant_descends():
    problem, D = sphere_setup(P=9)
    _, _, rep = minimize(problem, SolverConfig(degree=4, momentum=0.3, max_iterations=60), D)
    assert np.all(np.diff(rep.J_history) <= 1e-12)


def test_projection_triggered_near_boundary():
    # seed the iteration on the boundary ring so that the first steps leave the domain
    M = Sphere()
    V = F.LinearField.height(3.0)
    D = SublevelDomain(M, V, -2.85, SOUTH, 0.05, 0.1, 0.025)
    W = F.linear_height_plus_harmonics(1.0, [((1, 0), [0.2, 0, 0]), ((0, 1), [0, 0.2, 0])], 3, 2)
    assert check_hypotheses(D, W).passed
    problem = L.Problem(M, OMEGA, W, ts.QuadratureGrid(2, 9), V=V, domain=D)
    b = D.sample_boundary(1)[0]
    U0 = M.retract_closest(np.broadcast_to(SOUTH + 0.999 * (b - SOUTH), problem.grid.shape + (3,)))
    _, U, rep = minimize(problem, SolverConfig(degree=4, max_iterations=40, initial_step=4.0), D, U0=U0)
    assert len(rep.projections) >= 1
    assert np.all(D.contains(U))
    assert np.all(np.diff(rep.J_history) <= 1e-12)
    for p in rep.projections:
        assert p["J_after"] <= p["J_before"] + 1e-10


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(degree=4, points_per_dim=7)
    with pytest.raises(ValueError):
        SolverConfig(degree=4, residual_tol=0)
    with pytest.raises(KeyError):
        SolverConfig.from_dict({"degre": 3})
    assert SolverConfig(degree=5).points_per_dim == 11


def test_verify_flat(flat_run):
    problem, cfg, _ = flat_run
    oracle = problem.from_poly(flat_analytic_solution(1.0, flat_harmonics(), OMEGA, problem.degree))
    cert = verify(oracle, problem, cfg)
    assert cert.passed
    bad = oracle.copy()
    bad[0, 0, 0] += 1e-3
    cert = verify(bad, problem, cfg)
    assert not cert.checks["weak_residual"]["pass"]
    assert all(c["pass"] for name, c in cert.checks.items() if name != "weak_residual")


def test_verify_constant_critical():
    problem, D = sphere_setup(amplitude=0.0, P=9)
    cfg = SolverConfig(degree=4)
    U = np.broadcast_to(SOUTH, problem.grid.shape + (3,)).copy()
    cert = verify(U, problem, cfg)
    assert cert.passed
    assert cert.checks["kinetic_bound"]["value"] == 0
