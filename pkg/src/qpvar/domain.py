"""Sublevel domains ``{V < v}``, the smoothed inward projection, and hypothesis checks.

The collar coordinate ``z`` of a point is the signed arclength, along the
normalized gradient flow of ``V``, to the level set ``V = v`` (positive
outside). The smoothed projection moves points along the same flow line so
that ``z`` becomes ``Z_eps(z)``; ``Z_eps`` is the identity left of ``-eps`` and
constant right of ``0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import fields as F
from .conformal import ConformalStructure
from .geodesics import IntegrationError, ShootingError
from .manifolds import FlatSpace, RetractionError
from .torus_spectral import QuadratureGrid


class SamplingError(RuntimeError):
    pass


class CollarError(ValueError):
    """Point outside the collar where the normal coordinate is defined."""


# ---- mollifier --------------------------------------------------------------

def varpi(z, eps: float):
    """Bump ``exp(1/z - 1/(z + eps))`` on ``(-eps, 0)``, zero elsewhere."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = (z > -eps) & (z < 0)
    zi = z[inside]
    out[inside] = np.exp(1.0 / zi - 1.0 / (zi + eps))
    return out


class Mollifier:
    """``Z_eps`` and its derivative by adaptive quadrature.

    The bump is rescaled by ``exp(4/eps)`` (its maximum is ``exp(-4/eps)``),
    and the double integral is reduced to single integrals by parts:
    ``Z(z) = -eps + [int_{-eps}^z w(t)(t + eps) dt + (z + eps) int_z^0 w] / A``.
    """

    def __init__(self, eps: float):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.eps = float(eps)
        self._area = self._quad(lambda t: self._w(t), -self.eps, 0.0)

    def _w(self, t):
        e = self.eps
        if t <= -e or t >= 0:
            return 0.0
        return float(np.exp(1.0 / t - 1.0 / (t + e) + 4.0 / e))

    @staticmethod
    def _quad(f, a, b):
        if b <= a:
            return 0.0
        return integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0]

    def _scalar(self, z):
        e = self.eps
        if z <= -e:
            return z
        zc = min(z, 0.0)
        left = self._quad(lambda t: self._w(t) * (t + e), -e, zc)
        right = self._quad(self._w, zc, 0.0)
        return -e + (left + (zc + e) * right) / self._area

    def _dscalar(self, z):
        if z <= -self.eps:
            return 1.0
        if z >= 0:
            return 0.0
        # a ratio of nested integrals, bounded by 1 up to quadrature round-off
        return min(self._quad(self._w, z, 0.0) / self._area, 1.0)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.vectorize(self._scalar, otypes=[float])(z)

    def derivative(self, z):
        z = np.asarray(z, dtype=float)
        return np.vectorize(self._dscalar, otypes=[float])(z)

    @property
    def value_at_zero(self) -> float:
        return self._scalar(0.0)


def z_epsilon(z, eps: float):
    return Mollifier(eps)(z)


# ---- domains ----------------------------------------------------------------

class SublevelDomain:
    """Component of ``{x in M : V(x) < v}`` containing ``seed``."""

    bypass = False

    def __init__(self, manifold, V: F.ScalarField, level: float, seed, delta: float, delta0: float,
                 epsilon: float, flow_steps: int = 16, search_radius: float = 4.0):
        if not 0 < epsilon < delta < delta0:
            raise ValueError("need 0 < epsilon < delta < delta0")
        self.manifold = manifold
        self.V = V
        self.level = float(level)
        self.seed = manifold.check_on(np.asarray(seed, dtype=float))
        if not V.value(self.seed) < self.level:
            raise ValueError("seed must satisfy V(seed) < level")
        self.delta = float(delta)
        self.delta0 = float(delta0)
        self.epsilon = float(epsilon)
        self.flow_steps = flow_steps
        self.search_radius = search_radius
        self._basis = manifold.tangent_basis(self.seed)
        self._mollifiers = {}
        self._grad_sup = None

    def mollifier(self, eps: float | None = None) -> Mollifier:
        eps = self.epsilon if eps is None else float(eps)
        if eps not in self._mollifiers:
            self._mollifiers[eps] = Mollifier(eps)
        return self._mollifiers[eps]

    def to_config(self):
        return {"v": self.level, "seed": self.seed.tolist(), "delta": self.delta,
                "delta0": self.delta0, "epsilon": self.epsilon}

    # chart around the seed used only for sampling
    def chart(self, coords):
        coords = np.asarray(coords, dtype=float)
        return self.manifold.retract_closest(self.seed + coords @ self._basis.T)

    def _directions(self, count: int, rng=None):
        m = self.manifold.dim
        if m == 1:
            d = np.array([[1.0], [-1.0]])
            return np.repeat(d, int(np.ceil(count / 2)), axis=0)[:count]
        if m == 2 and rng is None:
            a = 2 * np.pi * (np.arange(count) + 0.5) / count
            return np.stack([np.cos(a), np.sin(a)], -1)
        rng = np.random.default_rng(0) if rng is None else rng
        d = rng.standard_normal((count, m))
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def chart_radius(self, dirs, level: float | None = None, iters: int = 60, cap: bool = False):
        """Chart radius along each direction where ``V`` first reaches ``level``.

        With ``cap`` directions that never reach the level get ``search_radius``.
        """
        level = self.level if level is None else level
        dirs = np.asarray(dirs, dtype=float)
        n_r = 200
        rs = np.linspace(0.0, self.search_radius, n_r + 1)[1:]
        vals = np.empty((len(dirs), n_r))
        for j, r in enumerate(rs):
            try:
                vals[:, j] = self.V.value(self.chart(r * dirs))
            except RetractionError:
                vals[:, j] = np.inf
        hit = vals >= level
        if cap:
            hit[:, -1] = True
        if not np.all(hit.any(axis=1)):
            raise SamplingError("level set not reached within the search radius along some direction")
        j = np.argmax(hit, axis=1)
        hi = rs[j]
        lo = np.where(j > 0, rs[np.maximum(j - 1, 0)], 0.0)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            above = self.V.value(self.chart(mid[:, None] * dirs)) >= level
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        return 0.5 * (lo + hi)

    def grad_sup(self) -> float:
        """Sampled ``1.1 * sup |grad V|`` over a neighbourhood of the closure."""
        if self._grad_sup is None:
            dirs = self._directions(64)
            R = self.chart_radius(dirs, cap=True)
            t = np.linspace(0.0, 1.5, 31)
            pts = self.chart((t[:, None, None] * R[None, :, None]) * dirs[None])
            g = self.manifold.project_tangent(pts, self.V.gradient(pts))
            self._grad_sup = 1.1 * float(np.max(np.linalg.norm(g, axis=-1)))
        return self._grad_sup

    @property
    def outer_level(self) -> float:
        """Level bounding the working region ``D`` (contains the ``delta0`` collar)."""
        return self.level + self.delta0 * self.grad_sup()

    def contains(self, x):
        return self.V.value(x) < self.level

    def margin(self, x):
        """``v - V(x)``; positive inside."""
        return self.level - self.V.value(x)

    def _unit_normal(self, x):
        g = self.manifold.project_tangent(x, self.V.gradient(x))
        gn = np.sum(g * g, -1)
        if np.any(gn < 1e-24):
            raise CollarError("critical point of V inside the collar")
        return g, gn

    def _flow_to_level(self, x, target):
        """RK4 in the level variable along ``grad V / |grad V|^2``; returns (foot, signed length)."""
        man = self.manifold
        ell0 = self.V.value(x)
        h = (target - ell0) / self.flow_steps
        sigma = np.zeros_like(ell0)

        def rhs(y):
            g, gn = self._unit_normal(y)
            return g / gn[..., None], 1.0 / np.sqrt(gn)

        for _ in range(self.flow_steps):
            k1, s1 = rhs(x)
            k2, s2 = rhs(x + 0.5 * h[..., None] * k1)
            k3, s3 = rhs(x + 0.5 * h[..., None] * k2)
            k4, s4 = rhs(x + h[..., None] * k3)
            x = man.retract_closest(x + h[..., None] / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
            sigma = sigma + h / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4)
        return x, sigma

    def _deep(self, x):
        return self.margin(x) > self.delta * self.grad_sup()

    def _raw_coordinate(self, flat):
        z = np.full(len(flat), -self.delta0)
        foot = np.full_like(flat, np.nan)
        near = ~self._deep(flat)
        if np.any(near):
            f, sigma = self._flow_to_level(flat[near], np.full(int(near.sum()), self.level))
            z[near] = -sigma
            foot[near] = f
        return z, foot

    def signed_normal_coordinate(self, x, return_foot: bool = False):
        """Signed distance ``z`` to the boundary along the normal flow (``z > 0`` outside).

        Points with ``v - V(x) > delta * sup|grad V|`` are at distance more than
        ``delta`` from the boundary and get the sentinel ``-delta0``.
        """
        x = np.asarray(x, dtype=float)
        z, foot = self._raw_coordinate(x.reshape(-1, x.shape[-1]))
        if np.any(z > self.delta0):
            raise CollarError(f"point outside the collar (z = {np.max(z):.3e} > delta0 = {self.delta0})")
        z = np.maximum(z, -self.delta0).reshape(x.shape[:-1])
        if return_foot:
            return z, foot.reshape(x.shape)
        return z

    def _move_inward(self, x, length):
        man = self.manifold
        h = length / self.flow_steps

        def rhs(y):
            g, gn = self._unit_normal(y)
            return -g / np.sqrt(gn)[..., None]

        for _ in range(self.flow_steps):
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * h[..., None] * k1)
            k3 = rhs(x + 0.5 * h[..., None] * k2)
            k4 = rhs(x + h[..., None] * k3)
            x = man.retract_closest(x + h[..., None] / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        return x

    def project_eps_omega(self, x, eps: float | None = None):
        """Smoothed projection of the collar into the domain; identity where ``z <= -eps``."""
        x = np.asarray(x, dtype=float)
        eps = self.epsilon if eps is None else float(eps)
        flat = x.reshape(-1, x.shape[-1]).copy()
        z = self.signed_normal_coordinate(flat)
        move = z > -eps
        if np.any(move):
            zm = z[move]
            length = zm - self.mollifier(eps)(zm)
            flat[move] = self._move_inward(flat[move], length)
        return flat.reshape(x.shape)

    # ---- sampling -------------------------------------------------------------

    def sample_boundary(self, count: int, rng=None):
        dirs = self._directions(count, rng)
        R = self.chart_radius(dirs)
        pts = self.chart(R[:, None] * dirs)
        # polish onto the level set along the normal flow
        pts, _ = self._flow_to_level(pts, np.full(len(pts), self.level))
        return pts

    def sample_closure(self, count: int, rng: np.random.Generator, boundary: int = 0):
        """Random points of the closure (uniform in chart radius^m), plus optional boundary points."""
        m = self.manifold.dim
        dirs = self._directions(count, rng)
        R = self.chart_radius(dirs)
        r = R * rng.uniform(0.0, 1.0, count) ** (1.0 / m)
        pts = self.chart(r[:, None] * dirs)
        pts = pts[self.V.value(pts) <= self.level]
        if len(pts) == 0:
            raise SamplingError("no interior samples found")
        if boundary:
            pts = np.concatenate([pts, self.sample_boundary(boundary)])
        return pts

    def sample_interior(self, count: int, rng: np.random.Generator):
        pts = self.sample_closure(count, rng)
        return pts[self.V.value(pts) < self.level]

    def sample_collar(self, count: int, rng: np.random.Generator, width: float | None = None):
        """Points with normal coordinate ``z <= width`` (default ``delta``) near the boundary."""
        width = self.delta if width is None else width
        m = self.manifold.dim
        dirs = self._directions(count, rng)
        R_in = self.chart_radius(dirs)
        R_out = self.chart_radius(dirs, self.level + 1.5 * width * self.grad_sup())
        lo = 0.5 * R_in
        r = (lo ** m + (R_out ** m - lo ** m) * rng.uniform(0.0, 1.0, count)) ** (1.0 / m)
        pts = self.chart(r[:, None] * dirs)
        pts = pts[self.V.value(pts) < self.outer_level]
        z, _ = self._raw_coordinate(pts)
        return pts[z <= width]

    def sample_region_D(self, count: int, rng: np.random.Generator):
        m = self.manifold.dim
        dirs = self._directions(count, rng)
        R = self.chart_radius(dirs, self.outer_level)
        r = R * rng.uniform(0.0, 1.0, count) ** (1.0 / m)
        return self.chart(r[:, None] * dirs)

    def inner_chart_radius(self, count: int = 256) -> float:
        """Smallest chart radius at which the boundary is reached."""
        dirs = self._directions(count)
        return float(np.min(self.chart_radius(dirs)))


class FlatBoxDomain:
    """Axis-aligned box in flat space; the conformal and projection machinery is bypassed."""

    bypass = True

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if np.any(self.upper <= self.lower):
            raise ValueError("box needs lower < upper")
        self.manifold = FlatSpace(len(self.lower))
        self.V = F.ConstantField(0.0, len(self.lower))
        self.seed = 0.5 * (self.lower + self.upper)
        self.level = 0.0
        self.delta = self.delta0 = self.epsilon = 0.0

    def to_config(self):
        return {"type": "flat_box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def margin(self, x):
        x = np.asarray(x, dtype=float)
        return np.min(np.minimum(x - self.lower, self.upper - x), axis=-1)

    def project_eps_omega(self, x, eps=None):
        return np.array(x, dtype=float)

    def grad_sup(self):
        return 0.0

    def sample_closure(self, count: int, rng: np.random.Generator, boundary: int = 0):
        pts = rng.uniform(self.lower, self.upper, size=(count, len(self.lower)))
        if boundary:
            pts = np.concatenate([pts, self.sample_boundary(boundary)])
        return pts

    sample_interior = sample_closure

    def sample_boundary(self, count: int, rng=None):
        m = len(self.lower)
        corners = np.array(np.meshgrid(*[[0, 1]] * m, indexing="ij")).reshape(m, -1).T
        pts = self.lower + corners * (self.upper - self.lower)
        return pts[:count] if count < len(pts) else pts


# ---- random maps into a domain ----------------------------------------------

class ChartMap:
    """``phi -> retract(seed + E p(phi))`` for a tangent-coordinate trigonometric polynomial ``p``."""

    def __init__(self, domain, poly):
        self.domain = domain
        self.poly = poly

    def __call__(self, phi):
        from .torus_spectral import evaluate
        return self.domain.chart(evaluate(self.poly, phi))

    def on_grid(self, grid: QuadratureGrid):
        return self(grid.nodes())


def random_chart_maps(domain, count: int, degree: int, k: int, rng: np.random.Generator,
                      fill: float = 0.85, decay: float = 1.0):
    """Random smooth maps ``T^k -> Omega`` with chart radius at most ``fill`` times the inner radius."""
    from .torus_spectral import TrigPolynomial, evaluate
    m = domain.manifold.dim
    r_in = domain.inner_chart_radius() if not domain.bypass else float(np.min(domain.upper - domain.lower) / 2)
    check = QuadratureGrid(k, 4 * degree + 4)
    nodes = check.nodes()
    maps = []
    for _ in range(count):
        p = TrigPolynomial.random(k, m, degree, rng, decay=decay)
        peak = float(np.max(np.linalg.norm(evaluate(p, nodes), axis=-1)))
        target = fill * r_in * rng.uniform(0.3, 1.0)
        maps.append(ChartMap(domain, p * (target / peak)))
    return maps


# ---- hypothesis checks ----------------------------------------------------

@dataclass
class SamplingConfig:
    omega_points: int = 400
    boundary_points: int = 64
    region_points: int = 400
    phi_per_dim: int = 8
    pairs: int = 16
    c1_pairs: int = 6
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict | None):
        d = dict(d or {})
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class HypothesisReport:
    verdicts: dict
    constants: dict
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v["pass"] for v in self.verdicts.values())

    def failing(self) -> set:
        return {name for name, v in self.verdicts.items() if not v["pass"]}

    def to_dict(self):
        return {"all_pass": self.passed, "verdicts": self.verdicts, "constants": self.constants,
                "notes": self.notes}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _sample_record(**arrays):
    return {k: (np.asarray(v).tolist() if v is not None else None) for k, v in arrays.items()}


def _verdict(name, inequality, values, samples, grid, strict: bool, phi=None):
    values = np.asarray(values, dtype=float)
    i = int(np.argmin(values))
    margin = float(values.reshape(-1)[i])
    ok = margin > 0 if strict else margin >= 0
    worst = {"x": np.asarray(samples).reshape(-1, np.shape(samples)[-1])[i % len(samples)].tolist()}
    if phi is not None:
        worst = {"phi": phi[i // len(samples)].tolist(),
                 "x": np.asarray(samples)[i % len(samples)].tolist()}
    return {"pass": bool(ok), "margin": margin, "inequality": inequality, "worst_sample": worst, "grid": grid}


def _failed(inequality, err, grid):
    return {"pass": False, "margin": float("nan"), "inequality": inequality,
            "worst_sample": {}, "grid": grid, "error": str(err)}


def boundary_hessian_margin(manifold, V, x):
    """Minimal eigenvalue of ``H_V`` on the tangent space of the level set through ``x``."""
    grad = V.gradient(x)
    form, E = F.tangent_hessian(manifold, x, grad, V.hessian(x))
    g = np.einsum("...ni,...n->...i", E, grad)
    g = g / np.linalg.norm(g, axis=-1, keepdims=True)
    m = form.shape[-1]
    proj = np.eye(m) - g[..., :, None] * g[..., None, :]
    # vectors along g get a large shift so they never carry the minimum
    shifted = proj @ form @ proj + 1e6 * (g[..., :, None] * g[..., None, :])
    return np.linalg.eigvalsh(shifted)[..., 0]


def estimate_c1(cs: ConformalStructure, pairs, fd: float = 1e-6):
    """Sampled operator norm of ``(x, y) -> chi'_s(0, x, y)`` derivatives (``C_1`` estimate)."""
    man = cs.manifold
    x, y = pairs
    best = 0.0
    for xi, yi in zip(x, y):
        Ex = man.tangent_basis(xi)
        Ey = man.tangent_basis(yi)
        m = Ex.shape[-1]
        xs = np.concatenate([xi[None], man.retract_closest(xi + fd * Ex.T), np.repeat(xi[None], m, 0)])
        ys = np.concatenate([yi[None], np.repeat(yi[None], m, 0), man.retract_closest(yi + fd * Ey.T)])
        _, d = cs.connecting_chi(xs, ys, [0.0])
        d = d[:, 0]
        Jx = (d[1:m + 1] - d[0]).T / fd
        Jy = (d[m + 1:] - d[0]).T / fd
        best = max(best, float(np.linalg.norm(Jx, 2)), float(np.linalg.norm(Jy, 2)))
    return best


def check_hypotheses(domain, W: F.ForceField, sampling: SamplingConfig | None = None) -> HypothesisReport:
    """Evaluate the convexity and invariance hypotheses on sample grids."""
    cfg = sampling or SamplingConfig()
    rng = np.random.default_rng(cfg.seed)
    man, V = domain.manifold, domain.V
    phi_grid = QuadratureGrid(W.k, cfg.phi_per_dim)
    phi = phi_grid.nodes().reshape(-1, W.k)
    closure = domain.sample_closure(cfg.omega_points, rng, boundary=cfg.boundary_points)
    boundary = domain.sample_boundary(cfg.boundary_points)
    grid_info = {"omega_points": int(len(closure)), "boundary_points": int(len(boundary)),
                 "phi_per_dim": cfg.phi_per_dim}
    verdicts = {}
    notes = []

    # H1 on the working region
    ineq = "lambda_V + |grad V|^2 / 2 >= 0 on D"
    try:
        region = closure if domain.bypass else domain.sample_region_D(cfg.region_points, rng)
        lam, _ = F.convexity_scalars(man, V, region, check=False)
        gV = man.project_tangent(region, V.gradient(region))
        verdicts["H1"] = _verdict("H1", ineq, lam + 0.5 * np.sum(gV * gV, -1), region,
                                  {"region_points": int(len(region))}, strict=False)
    except (SamplingError, RetractionError, CollarError) as err:
        verdicts["H1"] = _failed(ineq, err, {"region_points": cfg.region_points})

    cs = ConformalStructure(man, V)
    ineq = "log_V converges and the connecting geodesic stays in D"
    if domain.bypass:
        verdicts["H2a"] = {"pass": True, "margin": float("inf"), "inequality": ineq, "worst_sample": {},
                           "grid": {}, "note": "flat bypass: straight segments in a convex box"}
    else:
        try:
            pa = domain.sample_closure(cfg.pairs, rng)
            pb = domain.sample_closure(cfg.pairs, rng)
            n = min(len(pa), len(pb))
            pa, pb = pa[:n], pb[:n]
            zeta, _, conv, _ = cs.log_V(pa, pb, raise_on_failure=False, return_status=True)
            path = cs.flow(pa, zeta, 1.0, record=True).xs
            vmax = np.max(V.value(path), axis=0)
            marg = np.where(conv, domain.outer_level - vmax, -np.inf)
            verdicts["H2a"] = _verdict("H2a", ineq, marg, np.concatenate([pa, pb], -1),
                                       {"pairs": int(n)}, strict=True)
        except (SamplingError, ShootingError, IntegrationError, RetractionError) as err:
            verdicts["H2a"] = _failed(ineq, err, {"pairs": cfg.pairs})

    ineq = "H_V positive definite on the tangent space of the boundary"
    if domain.bypass:
        verdicts["H2b"] = {"pass": True, "margin": float("inf"), "inequality": ineq, "worst_sample": {},
                           "grid": {}, "note": "flat bypass: not applicable"}
    else:
        verdicts["H2b"] = _verdict("H2b", ineq, boundary_hessian_margin(man, V, boundary), boundary,
                                   grid_info, strict=True)

    ineq = "mu_V - 2 K* >= 0 on the closure"
    _, mu = F.convexity_scalars(man, V, closure, check=False)
    kstar, kinfo = man.k_star(closure, return_info=True)
    verdicts["H2c"] = _verdict("H2c", ineq, mu - 2 * kstar, closure, dict(grid_info, kstar=kinfo),
                               strict=False)

    ineq = "lambda_W + <grad W, grad V>/2 > 0 on T^k x closure"
    dens = F.convexity_density(man, W, V, phi[:, None, :], closure[None, :, :])
    verdicts["H3a"] = _verdict("H3a", ineq, dens, closure, grid_info, strict=True, phi=phi)
    kappa = float(np.min(dens))

    ineq = "<grad W, grad V> > 0 on T^k x boundary"
    if domain.bypass:
        verdicts["H3b"] = {"pass": True, "margin": float("inf"), "inequality": ineq, "worst_sample": {},
                           "grid": {}, "note": "flat bypass: not applicable"}
    else:
        xb = np.broadcast_to(boundary[None], (len(phi),) + boundary.shape)
        gW = man.project_tangent(xb, W.gradient(phi[:, None, :], xb))
        gV = man.project_tangent(xb, V.gradient(xb))
        verdicts["H3b"] = _verdict("H3b", ineq, np.sum(gW * gV, -1), boundary, grid_info, strict=True,
                                   phi=phi)

    vals = V.value(closure)
    v_min, v_max = float(np.min(vals)), float(np.max(vals))
    if not domain.bypass:
        v_max = max(v_max, domain.level)
    c, C = cs.chi_constants(v_min, v_max)
    c1 = float("nan")
    if not domain.bypass:
        try:
            pa = domain.sample_interior(cfg.c1_pairs, rng)
            pb = domain.sample_interior(cfg.c1_pairs, rng)
            n = min(len(pa), len(pb))
            c1 = estimate_c1(cs, (pa[:n], pb[:n]))
        except (SamplingError, ShootingError, IntegrationError) as err:
            notes.append(f"C1 estimate failed: {err}")
    else:
        c1 = 1.0
        notes.append("flat bypass: V = 0, chi is the straight segment, c = C = C1 = 1")
    constants = {"varkappa": kappa, "c": c, "C": C, "C1_est": c1, "V_min": v_min, "V_max": v_max}
    return HypothesisReport(verdicts, constants, notes)
