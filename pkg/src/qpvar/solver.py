"""Descent on the averaged Lagrangian over grid-valued maps ``T^k -> M``.

Each iteration takes a preconditioned Riemannian gradient step: the tangent
gradient ``P_T(-D^2 u + grad W)`` is smoothed by ``(sigma + (n.omega)^2)^-1``,
projected back to the tangent spaces, and followed along the closest-point
retraction with Armijo backtracking. Nodes that leave the domain are pushed
back with the smoothed projection, using widths ``eps / j`` for the ``j``-th
projection.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import lagrangian as L
from . import torus_spectral as ts
from .domain import CollarError
from .manifolds import RetractionError


class LineSearchFailure(RuntimeError):
    pass


@dataclass
class SolverConfig:
    degree: int = 6
    points_per_dim: int | None = None
    max_iterations: int = 500
    initial_step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 40
    residual_tol: float = 1e-9
    stall_tol: float = 1e-15
    stall_window: int = 50
    test_degree: int | None = None
    precond_shift: float = 1.0
    momentum: float = 0.0
    epsilon: float | None = None
    delta: float | None = None
    init_samples: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.points_per_dim is None:
            self.points_per_dim = 2 * self.degree + 1
        if self.points_per_dim < 2 * self.degree + 1:
            raise ValueError("points_per_dim must be at least 2 * degree + 1")
        if self.points_per_dim % 2 == 0:
            raise ValueError("points_per_dim must be odd")
        if self.residual_tol <= 0 or self.stall_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.test_degree is None:
            self.test_degree = self.degree

    @classmethod
    def from_dict(cls, d: dict | None):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown solver option(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class SolveReport:
    J_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    projections: list = field(default_factory=list)
    iterations: int = 0
    termination: str = ""
    final_residual: float = float("nan")
    test_family: dict = field(default_factory=dict)
    kinetic_norm2: float = float("nan")
    m_bound: float = float("nan")
    constraint_violation: float = float("nan")
    min_domain_margin: float = float("nan")
    J_final_unnormalized: float = float("nan")
    hypotheses: dict | None = None
    config: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.termination == "residual_tolerance"

    def to_dict(self):
        return asdict(self)

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def flat_analytic_solution(lam: float, harmonics, omega: ts.FrequencyVector, degree: int,
                           ambient_dim: int | None = None) -> ts.TrigPolynomial:
    """Exact minimizer of ``avg |D u|^2/2 + lam |u|^2/2 + sum Re(exp(i n.phi) <a_n, u>)`` on ``E^m``.

    Each amplitude ``a_n`` produces ``Re(U_n exp(i n.phi))`` with
    ``U_n = -a_n / (lam + (n.omega)^2)``, i.e. the stored coefficient pair is
    ``U_n / 2`` and its conjugate.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    w = omega.as_array()
    terms = {}
    for n, a in harmonics:
        n = tuple(int(i) for i in n)
        a = np.asarray(a, dtype=complex)
        if ambient_dim is None:
            ambient_dim = a.size
        neg = tuple(-i for i in n)
        if n == neg:
            key, val = n, -a.real / lam
        else:
            nw = float(np.dot(n, w))
            val = -a / (lam + nw ** 2) / 2.0
            key = n
            if neg in terms:  # keep one representative of each conjugate pair
                key, val = neg, np.conj(val)
        terms[key] = terms.get(key, 0) + val
    if ambient_dim is None:
        raise ValueError("ambient_dim needed when no harmonics are given")
    return ts.TrigPolynomial.from_dict(terms, omega.k, ambient_dim, degree)


def initial_constant(problem: L.Problem, domain, samples: int, rng: np.random.Generator):
    """Domain sample minimizing ``avg_phi W(phi, x)``."""
    if domain is not None:
        pts = domain.sample_closure(samples, rng)
        pts = pts[domain.contains(pts)] if not domain.bypass else pts
        pts = np.concatenate([pts, domain.seed[None]])
    else:
        pts = problem.manifold.random_points(samples, rng)
    phi = problem.nodes().reshape(-1, problem.k)
    avg = np.mean(problem.W.value(phi[:, None, :], pts[None]), axis=0)
    x0 = pts[int(np.argmin(avg))]
    return np.broadcast_to(x0, problem.grid.shape + x0.shape).copy()


class _Stepper:
    def __init__(self, problem, domain, config: SolverConfig, report: SolveReport):
        self.problem = problem
        self.domain = domain
        self.cfg = config
        self.report = report
        self.precond = 1.0 / (config.precond_shift + problem.symbol() ** 2)
        self.n_proj = 0
        eps = config.epsilon
        if domain is not None and not domain.bypass:
            eps = domain.epsilon if eps is None else eps
        self.eps = eps

    def direction(self, U, g, prev_step):
        man = self.problem.manifold
        d = -man.project_tangent(U, ts.apply_symbol(g, self.problem.grid, self.precond))
        if self.cfg.momentum and prev_step is not None:
            d = d + self.cfg.momentum * man.project_tangent(U, prev_step)
        return d

    def trial(self, U, d, t):
        """Retracted (and if needed projected) trial point; ``None`` if it leaves the collar."""
        man = self.problem.manifold
        try:
            Y = man.retract_closest(U + t * d)
        except RetractionError:
            return None, None
        dom = self.domain
        if dom is None or dom.bypass:
            return Y, None
        outside = ~dom.contains(Y)
        if not np.any(outside):
            return Y, None
        eps = self.eps / (self.n_proj + 1)
        try:
            Z = dom.project_eps_omega(Y, eps)
        except CollarError:
            return None, None
        if not np.all(dom.contains(Z)):
            return None, None
        rec = {"eps": eps, "nodes_outside": int(outside.sum()),
               "J_before": L.J(self.problem, Y, check=False), "J_after": L.J(self.problem, Z, check=False)}
        return Z, rec


def minimize(problem: L.Problem, config: SolverConfig, domain=None, U0=None, hypotheses=None):
    """Minimize ``J`` from ``U0`` (default: best constant map on the domain).

    Returns ``(u_star, U_star, report)`` with ``u_star`` the degree
    ``(P - 1) // 2`` interpolant of the final grid values ``U_star``.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    domain = problem.domain if domain is None else domain
    report = SolveReport(config=asdict(cfg), hypotheses=hypotheses)
    report.test_family = {"kind": "P_T(u) e_i cos/sin(n.phi)", "test_degree": cfg.test_degree,
                          "norm": "H1_omega", "skip_below": 1e-12}
    U = initial_constant(problem, domain, cfg.init_samples, rng) if U0 is None else np.array(U0, dtype=float)
    L.check_on_manifold(problem, U)
    stepper = _Stepper(problem, domain, cfg, report)
    Jc = L.J(problem, U)
    report.J_history.append(Jc)
    margins = []
    if domain is not None:
        margins.append(float(np.min(domain.margin(U))))
    prev_step = None
    t0 = cfg.initial_step
    reason = "max_iterations"
    for it in range(cfg.max_iterations):
        g = L.riemannian_gradient(problem, U)
        res, _ = L.weak_residual(problem, U, cfg.test_degree)
        report.residual_history.append(res)
        if res <= cfg.residual_tol:
            reason = "residual_tolerance"
            break
        d = stepper.direction(U, g, prev_step)
        slope = float(ts.grid_average(np.sum(g * d, -1), problem.grid))
        if slope >= 0:
            d = -g
            slope = float(ts.grid_average(np.sum(g * d, -1), problem.grid))
        t = t0
        accepted = False
        for _ in range(cfg.max_backtracks):
            Y, rec = stepper.trial(U, d, t)
            if Y is not None:
                Jy = L.J(problem, Y, check=False)
                if Jy <= Jc + cfg.armijo * t * slope:
                    accepted = True
                    break
            t *= cfg.backtrack
        if not accepted:
            reason = "line_search_failure"
            break
        if rec is not None:
            rec["iteration"] = it
            report.projections.append(rec)
            stepper.n_proj += 1
        prev_step = Y - U
        U, Jc = Y, Jy
        report.J_history.append(Jc)
        report.step_sizes.append(t)
        if domain is not None:
            margins.append(float(np.min(domain.margin(U))))
        report.iterations = it + 1
        # try a larger step next time after an accepted first trial
        t0 = min(cfg.initial_step, t / cfg.backtrack) if t < cfg.initial_step else cfg.initial_step
        w = cfg.stall_window
        if len(report.J_history) > w:
            drop = report.J_history[-w - 1] - Jc
            if drop <= cfg.stall_tol * max(1.0, abs(Jc)):
                reason = "stall"
                break
    else:
        report.iterations = cfg.max_iterations
    res, _ = L.weak_residual(problem, U, cfg.test_degree)
    report.final_residual = float(res)
    if reason == "max_iterations" and res <= cfg.residual_tol:
        reason = "residual_tolerance"
    report.termination = reason
    report.kinetic_norm2 = L.kinetic_norm2(problem, U)
    report.constraint_violation = float(np.max(problem.manifold.residual(U), initial=0.0))
    report.J_final_unnormalized = L.J(problem, U, check=False, unnormalized=True)
    if domain is not None:
        report.min_domain_margin = float(min(margins))
        samples = domain.sample_closure(cfg.init_samples, np.random.default_rng(cfg.seed + 1),
                                        boundary=64)
        report.m_bound = L.m_bound(problem.W, samples, problem.grid)
    return problem.to_poly(U), U, report


@dataclass
class Certificate:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def to_dict(self):
        return {"all_pass": self.passed, "checks": self.checks}


def verify(U, problem: L.Problem, config: SolverConfig, domain=None, conformal=None, constants=None,
           pairs: int = 0, rng: np.random.Generator | None = None) -> Certificate:
    """Bundle the weak residual, constraint and domain margins, the kinetic bound and optional sampled inequalities."""
    domain = problem.domain if domain is None else domain
    U = np.asarray(U, dtype=float)
    checks = {}
    res, table = L.weak_residual(problem, U, config.test_degree)
    worst = table.worst()
    checks["weak_residual"] = {"pass": bool(res <= config.residual_tol), "value": float(res),
                               "tolerance": config.residual_tol,
                               "worst": None if worst is None else {"n": list(worst[0]), "component": worst[1],
                                                                    "parity": worst[2]}}
    viol = float(np.max(problem.manifold.residual(U), initial=0.0))
    checks["constraint"] = {"pass": bool(viol <= problem.tol_on), "value": viol, "tolerance": problem.tol_on}
    kin = L.kinetic_norm2(problem, U)
    if domain is not None:
        marg = float(np.min(domain.margin(U)))
        checks["domain_membership"] = {"pass": bool(domain.bypass and marg >= 0 or marg > 0), "value": marg}
        samples = domain.sample_closure(config.init_samples, np.random.default_rng(config.seed + 1),
                                        boundary=64)
        mb = L.m_bound(problem.W, samples, problem.grid)
        checks["kinetic_bound"] = {"pass": bool(kin <= mb + 1e-8), "value": kin, "m_bound": mb}
    else:
        checks["kinetic_bound"] = {"pass": True, "value": kin, "m_bound": None, "note": "no domain given"}
    if conformal is not None and constants is not None and pairs and domain is not None and not domain.bypass:
        rng = np.random.default_rng(config.seed + 2) if rng is None else rng
        from .domain import random_chart_maps
        maps = random_chart_maps(domain, 2 * pairs, 4, problem.k, rng)
        worst_gap = np.inf
        for a, b in zip(maps[::2], maps[1::2]):
            gap, bound = L.convexity_gap(problem, conformal, a.on_grid(problem.grid), b.on_grid(problem.grid),
                                         constants["varkappa"], constants["c"])
            worst_gap = min(worst_gap, gap - bound)
        checks["convexity_gap"] = {"pass": bool(worst_gap >= -1e-10), "value": float(worst_gap), "pairs": pairs}
    return Certificate(checks)
