"""Geometry of the conformally rescaled metric ``e^V <., .>`` on ``M``.

Geodesics of the rescaled metric obey the covariant equation
``nabla_x' x' = -<grad V, x'> x' + |x'|^2 grad V / 2``. Two points are joined
by shooting (``log_V``); the connecting curve ``chi = gamma o tau`` moves along
that geodesic with the parametrization fixed by the scalar equation
``tau' = exp(V(gamma(tau))) * Q(1)``, ``Q(t) = int_0^t exp(-V(gamma))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import geodesics
from .fields import ScalarField, hesse_form


@dataclass
class GeodesicPath:
    s: np.ndarray
    x: np.ndarray
    v: np.ndarray
    V: np.ndarray
    metric: str = "rho_V"

    @property
    def first_integral(self) -> np.ndarray:
        """``e^V |v|^2`` along the path (constant for exact rescaled geodesics)."""
        return np.exp(self.V) * np.sum(self.v * self.v, -1)

    def write_csv(self, path):
        n = self.x.shape[-1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s"] + [f"x_{i + 1}" for i in range(n)] + [f"v_{i + 1}" for i in range(n)]
                       + ["V", "e^V|v|^2"])
            for row in zip(self.s, self.x, self.v, self.V, self.first_integral):
                w.writerow([repr(float(row[0]))] + [repr(float(a)) for a in row[1]]
                           + [repr(float(a)) for a in row[2]] + [repr(float(row[3])), repr(float(row[4]))])


class ConformalStructure:
    def __init__(self, manifold, V: ScalarField, steps: int = 128):
        self.manifold = manifold
        self.V = V
        self.steps = steps

    def grad_V(self, x):
        x = np.asarray(x, dtype=float)
        return self.manifold.project_tangent(x, self.V.gradient(x))

    def accel_V(self, x, xdot):
        """Covariant acceleration of a rescaled-metric geodesic (tangent vector)."""
        x = np.asarray(x, dtype=float)
        xdot = np.asarray(xdot, dtype=float)
        g = self.grad_V(x)
        return (-np.sum(g * xdot, -1)[..., None] * xdot
                + 0.5 * np.sum(xdot * xdot, -1)[..., None] * g)

    def _density(self, x):
        return np.exp(-self.V.value(x))

    def flow(self, x, xi, t=1.0, steps: int | None = None, record: bool = False, density: bool = False):
        steps = self.steps if steps is None else steps
        return geodesics.integrate(self.manifold, x, xi, t, steps, accel=self.accel_V,
                                   density=self._density if density else None, record=record)

    def exp_V(self, x, xi, t=1.0, steps: int | None = None, return_velocity: bool = False):
        x = self.manifold.check_on(x)
        xi = self.manifold.project_tangent(x, xi)
        fl = self.flow(x, xi, t, steps)
        return (fl.x, fl.v) if return_velocity else fl.x

    def log_V(self, x, y, tol: float = 1e-12, raise_on_failure: bool = True, return_status: bool = False):
        """Initial velocity ``zeta`` with ``exp_V(x, zeta) = y`` and the distance ``e^{V(x)/2} |zeta|``."""
        x = self.manifold.check_on(x)
        y = self.manifold.check_on(y)
        single = x.ndim == 1 and y.ndim == 1
        zeta, conv, res = geodesics.shoot(self.manifold, x, y, accel=self.accel_V, steps=self.steps,
                                          tol=tol, raise_on_failure=raise_on_failure)
        if single:
            zeta, conv, res = zeta[0], conv[0], res[0]
        xb = np.broadcast_to(x, zeta.shape)
        rho = np.exp(0.5 * self.V.value(xb)) * np.linalg.norm(zeta, axis=-1)
        if return_status:
            return zeta, rho, conv, res
        return zeta, rho

    def geodesic_path(self, x, y, nodes: int = 33) -> GeodesicPath:
        """Rescaled-metric geodesic from ``x`` to ``y`` sampled at ``nodes`` uniform times."""
        zeta, _ = self.log_V(x, y)
        per = max(1, int(np.ceil(self.steps / (nodes - 1))))
        fl = self.flow(x, zeta, 1.0, steps=per * (nodes - 1), record=True)
        xs, vs = fl.xs[::per], fl.vs[::per]
        return GeodesicPath(np.linspace(0.0, 1.0, nodes), xs, vs, self.V.value(xs))

    def tau_reparam(self, x, zeta, s_values, newton_iter: int = 12, return_state: bool = False):
        """Solve ``Q(tau(s)) = s Q(1)`` along the rescaled geodesic ``t -> exp_V(x, t zeta)``.

        ``x``, ``zeta`` have shape ``(..., n)``; the result has shape
        ``(..., S)``. With ``return_state`` also returns ``(gamma(tau),
        gamma'(tau), Q(1))``.
        """
        x = np.asarray(x, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        s = np.asarray(s_values, dtype=float)
        steps = self.steps
        fl = self.flow(x, zeta, 1.0, steps=steps, record=True, density=True)
        xs = np.moveaxis(fl.xs, 0, -2)  # (..., steps+1, n)
        vs = np.moveaxis(fl.vs, 0, -2)
        qs = np.moveaxis(fl.qs, 0, -1)  # (..., steps+1)
        Q1 = qs[..., -1]
        target = s * Q1[..., None]
        tau = np.broadcast_to(s, target.shape).copy()
        man, accel = self.manifold, self.accel_V

        def state_at(tau):
            idx = np.clip(np.floor(tau * steps).astype(int), 0, steps - 1)
            h = tau - idx / steps
            xi = np.take_along_axis(xs, idx[..., None], axis=-2)
            vi = np.take_along_axis(vs, idx[..., None], axis=-2)
            qi = np.take_along_axis(qs, idx, axis=-1)
            # one RK4 step of length h from the recorded node
            step = geodesics.integrate(man, xi, vi, h, 1, accel=accel, density=self._density)
            return step.x, step.v, qi + step.q

        for _ in range(newton_iter):
            xt, vt, qt = state_at(tau)
            dq = np.exp(-self.V.value(xt))
            tau = np.clip(tau - (qt - target) / dq, 0.0, 1.0)
        xt, vt, qt = state_at(tau)
        if return_state:
            return tau, xt, vt, Q1
        return tau

    def connecting_chi(self, x, y, s_values, zeta=None):
        """Connecting curve ``chi(s) = gamma(tau(s))`` and ``chi'_s = tau' gamma'(tau)``.

        Returns ``(chi, dchi)`` of shape ``(..., S, n)``.
        """
        x = self.manifold.check_on(x)
        y = self.manifold.check_on(y)
        if zeta is None:
            zeta, _ = self.log_V(x, y)
        x = np.broadcast_to(x, zeta.shape)
        _, xt, vt, Q1 = self.tau_reparam(x, zeta, s_values, return_state=True)
        dtau = np.exp(self.V.value(xt)) * Q1[..., None]
        return xt, dtau[..., None] * vt

    def k_v_sectional(self, x, xi, eta):
        """Sectional curvature of the rescaled metric on the plane spanned by ``xi``, ``eta``."""
        man = self.manifold
        x = man.check_on(x)
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        e1 = xi / np.linalg.norm(xi, axis=-1, keepdims=True)
        e2 = eta - np.sum(eta * e1, -1)[..., None] * e1
        n2 = np.linalg.norm(e2, axis=-1, keepdims=True)
        if np.any(n2 < 1e-12):
            from .manifolds import DegeneratePlaneError
            raise DegeneratePlaneError("tangent vectors do not span a plane")
        e2 = e2 / n2
        K = man.sectional_curvature(x, e1, e2, check=False)
        g = self.grad_V(x)
        acc = 0.0
        for e in (e1, e2):
            acc = acc + hesse_form(man, self.V, x, e, e, check=False) - 0.5 * np.sum(g * e, -1) ** 2
        w = np.exp(-self.V.value(x))
        return w * K - 0.5 * w * acc - 0.25 * w * np.sum(g * g, -1)

    def chi_constants(self, v_min: float, v_max: float):
        """``(c, C)`` with ``c rho <= |chi'_s| <= C rho`` given the range ``[v_min, v_max]`` of ``V``."""
        return float(np.exp(v_min - v_max)), float(np.exp(v_max - v_min))
