"""Acceptance criteria; each test prints one PASS/FAIL line, then asserts."""

import time
from pathlib import Path

import numpy as np
import pytest

from conftest import OMEGA, flat_harmonics, flat_setup, sphere_setup
from oracles import chart_gauss_curvature
from qpvar import fields as F
from qpvar import lagrangian as L
from qpvar import torus_spectral as ts
from qpvar.cli import main as cli_main
from qpvar.conformal import ConformalStructure
from qpvar.domain import Mollifier, check_hypotheses, random_chart_maps
from qpvar.manifolds import FlatSpace, Sphere, TorusOfRevolution
from qpvar.solver import SolverConfig, flat_analytic_solution, minimize

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
PAIRS = 100
PAIR_GRID = 9  # exact for the degree-4 chart coordinates of the random pairs


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def sphere_check():
    problem, D = sphere_setup(P=PAIR_GRID)
    return problem, D, check_hypotheses(D, problem.W)


@pytest.fixture(scope="module")
def random_pairs(sphere_check):
    _, D, _ = sphere_check
    maps = random_chart_maps(D, 2 * PAIRS, 4, 2, np.random.default_rng(2024))
    return list(zip(maps[::2], maps[1::2]))


@pytest.fixture(scope="module")
def sphere_solve():
    problem, D = sphere_setup(P=13)
    cfg = SolverConfig(degree=6, points_per_dim=13, test_degree=8, residual_tol=1e-9)
    t0 = time.perf_counter()
    out = minimize(problem, cfg, D)
    return problem, D, out, time.perf_counter() - t0


def test_criterion_01_flat_oracle(verdict):
    problem, D = flat_setup(P=17)
    t0 = time.perf_counter()
    u, U, rep = minimize(problem, SolverConfig(degree=8, points_per_dim=17, residual_tol=1e-10), D)
    elapsed = time.perf_counter() - t0
    oracle = flat_analytic_solution(1.0, flat_harmonics(), OMEGA, 8)
    err = np.sqrt(ts.parseval(u - oracle))
    ok = err <= 1e-8 and elapsed <= 10.0
    verdict(1, "flat oracle", ok, f"|u - u_oracle|_0 = {err:.2e} (<= 1e-8), runtime {elapsed:.2f}s (<= 10s)")
    assert ok


def test_criterion_02_weak_residual(verdict, sphere_solve):
    problem, _, (u, U, rep), elapsed = sphere_solve
    res, _ = L.weak_residual(problem, U, 8)
    ok = res <= 1e-6 and elapsed <= 60.0
    verdict(2, "weak residual, forced sphere", ok,
            f"max residual over |n|_inf <= 8 = {res:.2e} (<= 1e-6), runtime {elapsed:.2f}s (<= 60s)")
    assert ok


def test_criterion_03_gap_inequality(verdict, sphere_check, random_pairs):
    problem, D, rep = sphere_check
    cs = ConformalStructure(D.manifold, D.V)
    kappa, c = rep.constants["varkappa"], rep.constants["c"]
    slack = []
    for a, b in random_pairs:
        U0, U1 = a.on_grid(problem.grid), b.on_grid(problem.grid)
        assert np.all(D.contains(U0)) and np.all(D.contains(U1))
        gap, bound = L.convexity_gap(problem, cs, U0, U1, kappa, c)
        slack.append(gap - bound)
    worst = min(slack)
    ok = worst >= -1e-10
    verdict(3, "convexity gap inequality", ok,
            f"min(gap - bound) over {len(slack)} pairs = {worst:.3e} (>= -1e-10), varkappa={kappa:.4f}, c={c:.4f}")
    assert ok


def test_criterion_04_kinetic_convexity(verdict, sphere_check, random_pairs):
    problem, D, _ = sphere_check
    cs = ConformalStructure(D.manifold, D.V)
    phi = problem.grid.nodes()
    w = OMEGA.as_array()
    dt = 1e-4
    s = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    worst = np.inf
    for a, b in random_pairs:
        # D_omega chi by a centered difference along the flow direction
        plus, _ = cs.connecting_chi(a(phi + dt * w), b(phi + dt * w), s)
        minus, _ = cs.connecting_chi(a(phi - dt * w), b(phi - dt * w), s)
        f = np.sum(((plus - minus) / (2 * dt)) ** 2, -1)
        d2 = f[..., :-2] - 2 * f[..., 1:-1] + f[..., 2:]
        worst = min(worst, float(np.min(d2)))
    ok = worst >= -1e-6
    verdict(4, "kinetic convexity along chi", ok,
            f"min second difference at s in {{0.25, 0.5, 0.75}} = {worst:.3e} (>= -1e-6), {len(random_pairs)} pairs")
    assert ok


def test_criterion_05_sublevel_invariance(verdict, sphere_check):
    _, D, _ = sphere_check
    cs = ConformalStructure(D.manifold, D.V)
    rng = np.random.default_rng(5)
    x = D.sample_interior(80, rng)[:50]
    y = D.sample_interior(80, rng)[:50]
    vmax_gap, worst_d2 = -np.inf, np.inf
    for a, b in zip(x, y):
        path = cs.geodesic_path(a, b, nodes=33)
        vmax_gap = max(vmax_gap, float(np.max(path.V) - D.level))
        e = np.exp(path.V)
        worst_d2 = min(worst_d2, float(np.min(e[:-2] - 2 * e[1:-1] + e[2:])))
    ok = len(x) == 50 and vmax_gap < 0 and worst_d2 >= -1e-8
    verdict(5, "sublevel invariance of geodesics", ok,
            f"{len(x)} segments, max(V) - v = {vmax_gap:.3e} (< 0), min second difference of e^V = {worst_d2:.3e}"
            " (>= -1e-8)")
    assert ok


def test_criterion_06_conformal_curvature(verdict, sphere_check):
    _, D, _ = sphere_check
    cs = ConformalStructure(D.manifold, D.V)
    x = np.concatenate([D.sample_closure(300, np.random.default_rng(6))[:180], D.sample_boundary(20)])
    E = D.manifold.tangent_basis(x)
    kmax = float(np.max(cs.k_v_sectional(x, E[..., 0], E[..., 1])))
    a = np.array([0.7, -0.4])
    flat = ConformalStructure(FlatSpace(2), F.LinearField(a))
    pts = np.random.default_rng(7).uniform(-1, 1, (20, 2))
    e1, e2 = np.eye(2)
    err = max(abs(flat.k_v_sectional(p, e1, e2) - chart_gauss_curvature(flat.V, p)) for p in pts)
    ok = kmax <= 1e-8 and err <= 1e-4 and len(x) == 200
    verdict(6, "conformal curvature sign and chart oracle", ok,
            f"max K_V on {len(x)} samples = {kmax:.3e} (<= 1e-8), flat chart mismatch = {err:.2e} (<= 1e-4)")
    assert ok


def test_criterion_07_projection_suite(verdict, sphere_check):
    problem, D, rep = sphere_check
    M = D.manifold
    rng = np.random.default_rng(8)
    Z = Mollifier(D.epsilon)
    left = np.linspace(-D.delta0, -D.epsilon, 101)
    identity = bool(np.array_equal(Z(left), left))
    d = Z.derivative(np.linspace(-D.delta0, D.delta0, 801))
    deriv = bool(np.all((d >= 0) & (d <= 1)))
    x = D.sample_collar(400, rng)[:200]
    xi = M.project_tangent(x, rng.standard_normal(x.shape))
    xi /= np.linalg.norm(xi, axis=-1, keepdims=True)
    h = 1e-6
    fd = (D.project_eps_omega(M.retract_closest(x + h * xi))
          - D.project_eps_omega(M.retract_closest(x - h * xi))) / (2 * h)
    ratio = float(np.max(np.linalg.norm(fd, axis=-1)))
    xw = D.sample_collar(1000, rng)[:500]
    phi = rng.uniform(0, 2 * np.pi, (len(xw), 2))
    pw = D.project_eps_omega(xw)
    w_excess = float(np.max(problem.W.value(phi, pw) - problem.W.value(phi, xw)))
    inside_margin = float(np.min(D.margin(pw)))
    ok = (identity and deriv and len(x) == 200 and ratio <= 1 + 1e-6 and len(xw) == 500
          and w_excess <= 1e-10 and inside_margin > 0 and rep.passed)
    verdict(7, "projection suite", ok,
            f"identity left of -eps {identity}, Z' in [0,1] {deriv}, contraction ratio {ratio:.8f} (<= 1+1e-6), "
            f"max W increase {w_excess:.2e} (<= 1e-10), min v - V(P x) = {inside_margin:.3e} (> 0)")
    assert ok


def test_criterion_08_spectral_suite(verdict):
    rng = np.random.default_rng(9)
    parseval_err = rt_err = fd_err = 0.0
    monotone = True
    for k, N in [(1, 6), (2, 4), (3, 2)]:
        u = ts.TrigPolynomial.random(k, 3, N, rng)
        g = ts.QuadratureGrid(k, 2 * N + 1)
        ref = float(np.sum(np.abs(u.coefficients) ** 2))
        parseval_err = max(parseval_err, abs(ts.inner0(u, u, g) - ref) / max(1.0, ref))
        vals = ts.to_grid(u, g)
        rt_err = max(rt_err, float(np.max(np.abs(ts.from_grid(vals, g, N).coefficients - u.coefficients))))
    u = ts.TrigPolynomial.random(2, 3, 5, rng)
    du = ts.d_omega(u, OMEGA)
    w = OMEGA.as_array()
    h = 1e-5
    for phi in rng.uniform(0, 2 * np.pi, (20, 2)):
        fd = (ts.evaluate(u, phi + h * w) - ts.evaluate(u, phi - h * w)) / (2 * h)
        ex = ts.evaluate(du, phi)
        fd_err = max(fd_err, float(np.linalg.norm(fd - ex) / np.linalg.norm(ex)))
    g = ts.QuadratureGrid(2, 11)
    norms = [ts.inner0(ts.d_omega(u.truncate(n), OMEGA), ts.d_omega(u.truncate(n), OMEGA), g) for n in range(6)]
    monotone = all(b >= a - 1e-14 for a, b in zip(norms, norms[1:]))
    ok = parseval_err <= 1e-12 and fd_err <= 1e-6 and rt_err <= 1e-12 and monotone
    verdict(8, "spectral suite", ok,
            f"Parseval {parseval_err:.1e} (<= 1e-12), D_omega vs flow FD rel {fd_err:.1e} (<= 1e-6), "
            f"round trip {rt_err:.1e} (<= 1e-12), truncation monotone {monotone}")
    assert ok


def test_criterion_09_curvature_oracles(verdict):
    rng = np.random.default_rng(10)
    S1, S2, T = Sphere(), Sphere(2.0), TorusOfRevolution(2.0, 1.0)
    x = S1.retract_closest(rng.standard_normal((50, 3)))
    E = S1.tangent_basis(x)
    e_unit = float(np.max(np.abs(S1.sectional_curvature(x, E[..., 0], E[..., 1]) - 1)))
    x = S2.retract_closest(rng.standard_normal((50, 3)))
    E = S2.tangent_basis(x)
    e_two = float(np.max(np.abs(S2.sectional_curvature(x, E[..., 0], E[..., 1]) - 0.25)))
    outer, inner = T.point(0.3, 0.0), T.point(0.3, np.pi)
    Eo, Ei = T.tangent_basis(outer), T.tangent_basis(inner)
    e_out = abs(T.sectional_curvature(outer, Eo[:, 0], Eo[:, 1]) - 1 / 3)
    e_in = abs(T.sectional_curvature(inner, Ei[:, 0], Ei[:, 1]) + 1)
    ok = e_unit <= 1e-9 and e_two <= 1e-9 and e_out <= 1e-6 and e_in <= 1e-6
    verdict(9, "curvature oracles", ok,
            f"unit sphere {e_unit:.1e} (<= 1e-9), radius-2 sphere {e_two:.1e}, torus outer {e_out:.1e} "
            f"and inner {e_in:.1e} (<= 1e-6)")
    assert ok


def test_criterion_10_descent_and_bound(verdict, sphere_solve):
    problem, _, (_, U, rep), _ = sphere_solve
    rise = float(np.max(np.diff(rep.J_history), initial=-np.inf))
    kin = L.kinetic_norm2(problem, U)
    ok = rise <= 1e-12 and kin <= rep.m_bound + 1e-8
    verdict(10, "descent and a-priori bound", ok,
            f"max J increase per accepted step {rise:.2e} (<= 1e-12), |D u|_0^2 = {kin:.4e} <= M = {rep.m_bound:.4e}")
    assert ok


def test_criterion_11_checker_discrimination(verdict, tmp_path):
    problem, D = sphere_setup()
    good = check_hypotheses(D, problem.W)
    positive = good.passed and all(v["margin"] > 0 for v in good.verdicts.values())
    problem_n, D_n = sphere_setup(beta=-1.0)
    failing = check_hypotheses(D_n, problem_n.W).failing()
    code = cli_main(["check", "--config", str(SCENARIOS / "sphere_negative_beta.json"), "--out", str(tmp_path)])
    ok = positive and failing == {"H3b"} and code != 0
    verdict(11, "checker discrimination", ok,
            f"beta=1 all pass with positive margins {positive}; beta=-1 failing set {sorted(failing)} "
            f"(expected exactly ['H3b']), check exit code {code} (nonzero)")
    assert ok
