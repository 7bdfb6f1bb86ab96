"""Implicitly defined submanifolds of Euclidean space.

``M = {x in E^n : g(x) = 0}`` with ``g: E^n -> E^(n-m)``. Everything else
(tangent projector, second fundamental form, curvature via the Gauss
equation, geodesics) is derived from ``g`` and its first two derivatives.
All methods broadcast over leading axes of their array arguments.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize

from . import geodesics


class OffManifoldError(ValueError):
    pass


class RetractionError(RuntimeError):
    pass


class DegeneratePlaneError(ValueError):
    pass


class EmbeddedManifold:
    tol_on = 1e-8
    capture_radius = np.inf
    max_step = 0.003
    min_steps = 64

    def __init__(self, ambient_dim: int, dim: int):
        if not 0 < dim <= ambient_dim:
            raise ValueError("need 0 < dim <= ambient_dim")
        self.ambient_dim = ambient_dim
        self.dim = dim

    @property
    def codim(self) -> int:
        return self.ambient_dim - self.dim

    # constraint map, to be provided by subclasses
    def constraint(self, x):
        raise NotImplementedError

    def constraint_jacobian(self, x):
        raise NotImplementedError

    def constraint_hessian(self, x):
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    def residual(self, x) -> np.ndarray:
        """``||g(x)||`` per point."""
        x = np.asarray(x, dtype=float)
        if self.codim == 0:
            return np.zeros(x.shape[:-1])
        return np.linalg.norm(self.constraint(x), axis=-1)

    def check_on(self, x, tol: float | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.ambient_dim:
            raise ValueError(f"expected points in E^{self.ambient_dim}, got trailing size {x.shape[-1]}")
        tol = self.tol_on if tol is None else tol
        res = self.residual(x)
        if np.any(res > tol):
            raise OffManifoldError(f"point(s) off the manifold: constraint residual {np.max(res):.3e} > {tol:.1e}")
        return x

    def _multipliers(self, x, w):
        """``(J J^T)^{-1} J w`` and ``J``."""
        J = self.constraint_jacobian(x)
        gram = J @ np.swapaxes(J, -1, -2)
        rhs = np.einsum("...cn,...n->...c", J, w)
        return np.linalg.solve(gram, rhs[..., None])[..., 0], J

    def project_normal(self, x, w, check: bool = False):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        if check:
            self.check_on(x)
        if self.codim == 0:
            return np.zeros(np.broadcast_shapes(x.shape, w.shape))
        mu, J = self._multipliers(x, w)
        return np.einsum("...cn,...c->...n", J, mu)

    def project_tangent(self, x, w, check: bool = False):
        """Orthogonal projection of ``w`` onto ``T_x M``."""
        w = np.asarray(w, dtype=float)
        return w - self.project_normal(x, w, check=check)

    def tangent_basis(self, x, check: bool = False):
        """Orthonormal basis of ``T_x M`` as columns, shape ``(..., n, m)``."""
        x = np.asarray(x, dtype=float)
        if check:
            self.check_on(x)
        eye = np.broadcast_to(np.eye(self.ambient_dim), x.shape[:-1] + (self.ambient_dim,) * 2)
        if self.codim == 0:
            return eye.copy()
        proj = self.project_tangent(x[..., None, :], eye)  # rows are P e_i, P symmetric
        _, vecs = np.linalg.eigh(proj)
        return vecs[..., :, self.codim:]

    def second_fundamental_form(self, x, xi, eta, check: bool = False):
        """Normal vector ``II(xi, eta) = -J^T (J J^T)^{-1} [xi^T H_a eta]_a``."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        if check:
            self.check_on(x)
        if self.codim == 0:
            return np.zeros(np.broadcast_shapes(x.shape, xi.shape, eta.shape))
        J = self.constraint_jacobian(x)
        H = self.constraint_hessian(x)
        quad = np.einsum("...i,...cij,...j->...c", xi, H, eta)
        gram = J @ np.swapaxes(J, -1, -2)
        mu = np.linalg.solve(gram, quad[..., None])[..., 0]
        return -np.einsum("...cn,...c->...n", J, mu)

    def retract_closest(self, y, tol: float = 1e-14, maxiter: int = 50):
        """Closest point of ``M`` to ``y`` (Newton on the Lagrange system)."""
        y = np.asarray(y, dtype=float)
        if self.codim == 0:
            return y.copy()
        n, c = self.ambient_dim, self.codim
        x = y.copy()
        # Gauss-Newton steps onto the constraint set give a start point
        for _ in range(5):
            g = self.constraint(x)
            J = self.constraint_jacobian(x)
            gram = J @ np.swapaxes(J, -1, -2)
            x = x - np.einsum("...cn,...c->...n", J, np.linalg.solve(gram, g[..., None])[..., 0])
        # fixed-point sweeps (tangent step toward y, then back onto M) as a warm start
        for _ in range(30):
            step = self.project_tangent(x, y - x)
            if np.max(np.abs(step), initial=0.0) < 1e-6:
                break
            x = x + step
            for _ in range(3):
                g = self.constraint(x)
                J = self.constraint_jacobian(x)
                gram = J @ np.swapaxes(J, -1, -2)
                x = x - np.einsum("...cn,...c->...n", J, np.linalg.solve(gram, g[..., None])[..., 0])
        mu, _ = self._multipliers(x, y - x)
        mu = -mu
        eye = np.eye(n)
        for _ in range(maxiter):
            g = self.constraint(x)
            J = self.constraint_jacobian(x)
            H = self.constraint_hessian(x)
            r1 = x - y + np.einsum("...cn,...c->...n", J, mu)
            if max(np.max(np.abs(r1), initial=0.0), np.max(np.abs(g), initial=0.0)) < tol:
                break
            A = eye + np.einsum("...c,...cij->...ij", mu, H)
            top = np.concatenate([A, np.swapaxes(J, -1, -2)], axis=-1)
            bot = np.concatenate([J, np.zeros(J.shape[:-1] + (c,))], axis=-1)
            K = np.concatenate([top, bot], axis=-2)
            rhs = -np.concatenate([r1, g], axis=-1)
            step = np.linalg.solve(K, rhs[..., None])[..., 0]
            x = x + step[..., :n]
            mu = mu + step[..., n:]
        else:
            g = self.constraint(x)
            if np.max(np.abs(g)) > 1e3 * tol:
                raise RetractionError(f"closest-point Newton did not converge (residual {np.max(np.abs(g)):.3e})")
        if np.isfinite(self.capture_radius):
            dist = np.linalg.norm(x - y, axis=-1)
            if np.any(dist > self.capture_radius):
                raise RetractionError("point outside the capture radius of the retraction")
        if not np.all(np.isfinite(x)):
            raise RetractionError("closest-point iteration produced non-finite values")
        return x

    def sectional_curvature(self, x, xi, eta, check: bool = True):
        """Gauss equation: ``(<II(xi,xi), II(eta,eta)> - |II(xi,eta)|^2) / area^2``."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        if check:
            self.check_on(x)
        denom = (np.sum(xi * xi, -1) * np.sum(eta * eta, -1) - np.sum(xi * eta, -1) ** 2)
        if np.any(denom < 1e-12):
            raise DegeneratePlaneError("tangent vectors do not span a plane")
        a = self.second_fundamental_form(x, xi, xi)
        b = self.second_fundamental_form(x, eta, eta)
        c = self.second_fundamental_form(x, xi, eta)
        return (np.sum(a * b, -1) - np.sum(c * c, -1)) / denom

    def shape_operator(self, x):
        """Tangent-basis matrix of the scalar second fundamental form (hypersurfaces only)."""
        if self.codim != 1:
            raise ValueError("shape operator is defined here for hypersurfaces only")
        x = np.asarray(x, dtype=float)
        E = self.tangent_basis(x)
        J = self.constraint_jacobian(x)[..., 0, :]
        H = self.constraint_hessian(x)[..., 0, :, :]
        gnorm = np.linalg.norm(J, axis=-1)
        return -np.einsum("...ni,...nk,...kj->...ij", E, H, E) / gnorm[..., None, None]

    def principal_curvatures(self, x):
        return np.linalg.eigvalsh(self.shape_operator(x))

    def k_star(self, x, restarts: int = 8, rng: np.random.Generator | None = None,
               return_info: bool = False):
        """Maximum sectional curvature at ``x``."""
        x = self.check_on(x)
        info = {"method": None, "restarts": 0}
        if self.dim < 2:
            info["method"] = "no_planes"
            val = np.zeros(x.shape[:-1])
        elif self.codim == 0:
            info["method"] = "flat"
            val = np.zeros(x.shape[:-1])
        elif self.dim == 2:
            info["method"] = "single_plane"
            E = self.tangent_basis(x)
            val = self.sectional_curvature(x, E[..., 0], E[..., 1], check=False)
        elif self.codim == 1:
            info["method"] = "principal_products"
            kap = self.principal_curvatures(x)
            i, j = np.triu_indices(self.dim, 1)
            val = np.max(kap[..., i] * kap[..., j], axis=-1)
        else:
            info["method"] = "random_restart"
            info["restarts"] = restarts
            rng = np.random.default_rng(0) if rng is None else rng
            flat = x.reshape(-1, self.ambient_dim)
            out = np.empty(len(flat))
            for p, xp in enumerate(flat):
                E = self.tangent_basis(xp)

                def neg(ab, E=E, xp=xp):
                    a, b = ab[: self.dim], ab[self.dim:]
                    xi, eta = E @ a, E @ b
                    try:
                        return -float(self.sectional_curvature(xp, xi, eta, check=False))
                    except DegeneratePlaneError:
                        return 0.0

                best = -np.inf
                for _ in range(restarts):
                    res = optimize.minimize(neg, rng.standard_normal(2 * self.dim), method="Nelder-Mead",
                                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
                    best = max(best, -res.fun)
                out[p] = best
            val = out.reshape(x.shape[:-1])
        if return_info:
            return val, info
        return val

    def _steps_for(self, length) -> int:
        length = float(np.max(np.abs(length), initial=0.0))
        return max(self.min_steps, int(np.ceil(length / self.max_step)))

    def geodesic_exp(self, x, xi, t=1.0, steps: int | None = None, return_velocity: bool = False):
        """``exp_x(t xi)`` by integrating ``x'' = II(x', x')``."""
        x = self.check_on(x)
        xi = np.asarray(xi, dtype=float)
        t = np.asarray(t, dtype=float)
        if steps is None:
            steps = self._steps_for(t * np.linalg.norm(xi, axis=-1))
        flow = geodesics.integrate(self, x, self.project_tangent(x, xi), t, steps)
        if return_velocity:
            return flow.x, flow.v
        return flow.x

    def log(self, x, y, steps: int | None = None, tol: float = 1e-12):
        """Initial velocity of the geodesic from ``x`` reaching ``y`` at time 1."""
        x = self.check_on(x)
        y = self.check_on(y)
        single = x.ndim == 1 and y.ndim == 1
        steps = self._steps_for(np.linalg.norm(y - x, axis=-1) * 1.6) if steps is None else steps
        zeta, conv, res = geodesics.shoot(self, x, y, steps=steps, tol=tol)
        return zeta[0] if single else zeta

    def distance_rho(self, x, y, steps: int | None = None, fallback: bool = True):
        """Riemannian distance by geodesic shooting.

        Pairs where shooting fails fall back to a discrete path-shortening
        estimate when ``fallback`` is set; otherwise ``ShootingError`` is raised.
        """
        x = self.check_on(x)
        y = self.check_on(y)
        single = x.ndim == 1 and y.ndim == 1
        steps = self._steps_for(np.linalg.norm(y - x, axis=-1) * 1.6) if steps is None else steps
        zeta, conv, _ = geodesics.shoot(self, x, y, steps=steps, raise_on_failure=not fallback)
        dist = np.linalg.norm(zeta, axis=-1)
        if not np.all(conv):
            xb, yb = np.broadcast_arrays(np.atleast_2d(x), np.atleast_2d(y))
            xb = xb.reshape(-1, self.ambient_dim)
            yb = yb.reshape(-1, self.ambient_dim)
            flat = dist.reshape(-1)
            for i in np.flatnonzero(~conv.reshape(-1)):
                flat[i] = geodesics.path_shortening(self, xb[i], yb[i])[1]
            dist = flat.reshape(dist.shape)
        return float(dist[0]) if single else dist

    def random_points(self, n_points: int, rng: np.random.Generator, center=None, radius: float = 1.0):
        """Points near ``center`` (default: a built-in reference point) retracted onto ``M``."""
        center = self.reference_point() if center is None else np.asarray(center, dtype=float)
        E = self.tangent_basis(center)
        coef = rng.uniform(-radius, radius, size=(n_points, self.dim))
        return self.retract_closest(center + coef @ E.T)

    def reference_point(self) -> np.ndarray:
        raise NotImplementedError


class FlatSpace(EmbeddedManifold):
    """``E^m`` itself (empty constraint)."""

    def __init__(self, dim: int):
        super().__init__(dim, dim)

    def constraint(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (0,))

    def constraint_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (0, self.ambient_dim))

    def constraint_hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (0, self.ambient_dim, self.ambient_dim))

    def project_tangent(self, x, w, check: bool = False):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        return np.broadcast_to(w, np.broadcast_shapes(x.shape, w.shape)).copy()

    def retract_closest(self, y, tol: float = 1e-14, maxiter: int = 50):
        return np.array(y, dtype=float)

    def distance_rho(self, x, y, steps: int | None = None, fallback: bool = True):
        d = np.linalg.norm(np.asarray(y, dtype=float) - np.asarray(x, dtype=float), axis=-1)
        return float(d) if np.ndim(d) == 0 else d

    def reference_point(self):
        return np.zeros(self.ambient_dim)

    def to_config(self):
        return {"type": "flat", "params": {"dim": self.dim}}


class Sphere(EmbeddedManifold):
    """Radius-``R`` sphere ``S^(n-1)`` in ``E^n`` centred at the origin."""

    def __init__(self, radius: float = 1.0, ambient_dim: int = 3):
        if radius <= 0:
            raise ValueError("radius must be positive")
        super().__init__(ambient_dim, ambient_dim - 1)
        self.radius = float(radius)

    def constraint(self, x):
        x = np.asarray(x, dtype=float)
        return ((np.sum(x * x, -1) - self.radius ** 2) / (2 * self.radius))[..., None]

    def constraint_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return (x / self.radius)[..., None, :]

    def constraint_hessian(self, x):
        x = np.asarray(x, dtype=float)
        eye = np.eye(self.ambient_dim) / self.radius
        return np.broadcast_to(eye, x.shape[:-1] + (1,) + eye.shape).copy()

    def project_normal(self, x, w, check: bool = False):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        if check:
            self.check_on(x)
        return x * (np.sum(x * w, -1) / np.sum(x * x, -1))[..., None]

    def second_fundamental_form(self, x, xi, eta, check: bool = False):
        x = np.asarray(x, dtype=float)
        if check:
            self.check_on(x)
        return -x * (np.sum(np.asarray(xi) * np.asarray(eta), -1) / np.sum(x * x, -1))[..., None]

    def retract_closest(self, y, tol: float = 1e-14, maxiter: int = 50):
        y = np.asarray(y, dtype=float)
        norm = np.linalg.norm(y, axis=-1, keepdims=True)
        if np.any(norm == 0):
            raise RetractionError("the centre of the sphere has no closest point")
        return self.radius * y / norm

    def reference_point(self):
        p = np.zeros(self.ambient_dim)
        p[-1] = -self.radius
        return p

    def to_config(self):
        return {"type": "sphere", "params": {"radius": self.radius, "ambient_dim": self.ambient_dim}}


class TorusOfRevolution(EmbeddedManifold):
    """Torus in ``E^3`` around the ``x_3`` axis: tube radius ``r`` about a circle of radius ``R``."""

    def __init__(self, R_major: float = 2.0, r_minor: float = 1.0):
        if not 0 < r_minor < R_major:
            raise ValueError("need 0 < r_minor < R_major")
        super().__init__(3, 2)
        self.R = float(R_major)
        self.r = float(r_minor)

    def point(self, u, v):
        """Parametrization ``((R + r cos v) cos u, (R + r cos v) sin u, r sin v)``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        rho = self.R + self.r * np.cos(v)
        return np.stack([rho * np.cos(u), rho * np.sin(u), self.r * np.sin(v) + 0 * u], axis=-1)

    def constraint(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.hypot(x[..., 0], x[..., 1])
        return (0.5 * ((rho - self.R) ** 2 + x[..., 2] ** 2 - self.r ** 2))[..., None]

    def constraint_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.hypot(x[..., 0], x[..., 1])
        f = (rho - self.R) / rho
        return np.stack([f * x[..., 0], f * x[..., 1], x[..., 2]], axis=-1)[..., None, :]

    def constraint_hessian(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.hypot(x[..., 0], x[..., 1])
        f = (rho - self.R) / rho
        xh = np.stack([x[..., 0] / rho, x[..., 1] / rho], axis=-1)
        H = np.zeros(x.shape[:-1] + (3, 3))
        H[..., :2, :2] = f[..., None, None] * np.eye(2) + (self.R / rho)[..., None, None] * (
            xh[..., :, None] * xh[..., None, :])
        H[..., 2, 2] = 1.0
        return H[..., None, :, :]

    def retract_closest(self, y, tol: float = 1e-14, maxiter: int = 50):
        y = np.asarray(y, dtype=float)
        rho = np.hypot(y[..., 0], y[..., 1])
        if np.any(rho == 0):
            raise RetractionError("points on the symmetry axis have no unique closest point")
        centre = np.stack([self.R * y[..., 0] / rho, self.R * y[..., 1] / rho, 0 * rho], axis=-1)
        d = y - centre
        dn = np.linalg.norm(d, axis=-1, keepdims=True)
        if np.any(dn == 0):
            raise RetractionError("points on the core circle have no unique closest point")
        return centre + self.r * d / dn

    def reference_point(self):
        return np.array([self.R + self.r, 0.0, 0.0])

    def to_config(self):
        return {"type": "torus_rev", "params": {"R_major": self.R, "r_minor": self.r}}


class Ellipsoid(EmbeddedManifold):
    """``sum_i x_i^2 / a_i^2 = 1`` in ``E^n``; closest points by the generic Newton iteration."""

    def __init__(self, semi_axes):
        a = np.asarray(semi_axes, dtype=float)
        if a.ndim != 1 or a.size < 2 or np.any(a <= 0):
            raise ValueError("semi_axes must be a positive vector of length >= 2")
        super().__init__(a.size, a.size - 1)
        self.semi_axes = a

    def constraint(self, x):
        x = np.asarray(x, dtype=float)
        return (0.5 * (np.sum((x / self.semi_axes) ** 2, -1) - 1.0))[..., None]

    def constraint_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return (x / self.semi_axes ** 2)[..., None, :]

    def constraint_hessian(self, x):
        x = np.asarray(x, dtype=float)
        H = np.diag(1.0 / self.semi_axes ** 2)
        return np.broadcast_to(H, x.shape[:-1] + (1,) + H.shape).copy()

    def reference_point(self):
        p = np.zeros(self.ambient_dim)
        p[-1] = -self.semi_axes[-1]
        return p

    def to_config(self):
        return {"type": "ellipsoid", "params": {"semi_axes": self.semi_axes.tolist()}}


def manifold_from_config(cfg: dict) -> EmbeddedManifold:
    """Build a manifold from ``{type, params}``."""
    kind = cfg.get("type")
    params = dict(cfg.get("params", {}))
    if kind == "sphere":
        return Sphere(radius=params.get("radius", 1.0), ambient_dim=params.get("ambient_dim", 3))
    if kind == "flat":
        return FlatSpace(int(params.get("dim", 3)))
    if kind == "torus_rev":
        return TorusOfRevolution(params.get("R_major", 2.0), params.get("r_minor", 1.0))
    if kind == "ellipsoid":
        return Ellipsoid(params["semi_axes"])
    raise ValueError(f"unknown manifold type {kind!r}")
