"""Second-order geodesic-type ODEs on implicit submanifolds.

A curve on ``M`` subject to a prescribed covariant acceleration ``a(x, v)`` has
ambient acceleration ``a(x, v) + II(v, v)``. Integration is classical RK4 with
a fixed number of steps; after every step the state is re-projected
(closest point for ``x``, tangent projection for ``v``). Fixed step counts
keep the flow map a smooth function of the initial data, which the shooting
solver and all finite-difference checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class IntegrationError(RuntimeError):
    pass


class ShootingError(RuntimeError):
    """Boundary-value shooting failed for at least one pair."""

    def __init__(self, message, converged=None, residual=None):
        super().__init__(message)
        self.converged = converged
        self.residual = residual


@dataclass
class Flow:
    x: np.ndarray
    v: np.ndarray
    q: np.ndarray | None = None
    xs: np.ndarray | None = None
    vs: np.ndarray | None = None
    qs: np.ndarray | None = None


def integrate(manifold, x0, v0, T=1.0, steps: int = 64, accel=None, density=None,
              record: bool = False) -> Flow:
    """Integrate ``x'' = accel(x, x') + II(x', x')`` from ``(x0, v0)`` over ``[0, T]``.

    ``x0``, ``v0`` have shape ``(..., n)``; ``T`` broadcasts against the batch
    shape so every element may use its own horizon. ``density(x)`` (optional)
    is integrated along the curve alongside the state.
    """
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    T = np.asarray(T, dtype=float)
    h = np.broadcast_to(T, x.shape[:-1]) / steps
    hv = h[..., None]
    q = np.zeros(x.shape[:-1]) if density is not None else None

    def rhs(xx, vv):
        acc = manifold.second_fundamental_form(xx, vv, vv)
        if accel is not None:
            acc = acc + accel(xx, vv)
        return vv, acc

    xs = [x.copy()] if record else None
    vs = [v.copy()] if record else None
    qs = [q.copy()] if record and q is not None else None
    for _ in range(steps):
        k1x, k1v = rhs(x, v)
        k2x, k2v = rhs(x + 0.5 * hv * k1x, v + 0.5 * hv * k1v)
        k3x, k3v = rhs(x + 0.5 * hv * k2x, v + 0.5 * hv * k2v)
        k4x, k4v = rhs(x + hv * k3x, v + hv * k3v)
        if density is not None:
            d1 = density(x)
            d2 = density(x + 0.5 * hv * k1x)
            d3 = density(x + 0.5 * hv * k2x)
            d4 = density(x + hv * k3x)
            q = q + h / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4)
        x = x + hv / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + hv / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        x = manifold.retract_closest(x)
        v = manifold.project_tangent(x, v)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise IntegrationError("non-finite state during geodesic integration")
        if record:
            xs.append(x.copy())
            vs.append(v.copy())
            if q is not None:
                qs.append(q.copy())
    flow = Flow(x=x, v=v, q=q)
    if record:
        flow.xs = np.stack(xs)
        flow.vs = np.stack(vs)
        flow.qs = np.stack(qs) if qs is not None else None
    return flow


def shoot(manifold, x, y, accel=None, steps: int = 64, tol: float = 1e-12,
          maxiter: int = 30, fd_step: float = 1e-7, raise_on_failure: bool = True):
    """Initial velocities ``zeta`` with ``flow(x, zeta, 1) = y`` by Gauss-Newton.

    The unknown is parametrized in an orthonormal tangent basis at ``x`` and
    initialized from the tangent projection of the chord ``y - x``. Returns
    ``(zeta, converged, residual)``; batched over leading axes.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    batch = x.shape[:-1]
    x = x.reshape(-1, x.shape[-1])
    y = y.reshape(-1, y.shape[-1])
    B, n = x.shape
    E = manifold.tangent_basis(x)  # (B, n, m)
    m = E.shape[-1]
    a = np.einsum("bnm,bn->bm", E, y - x)
    scale = np.maximum(np.linalg.norm(a, axis=-1), 1.0)
    converged = np.zeros(B, dtype=bool)
    residual = np.full(B, np.inf)
    active = np.arange(B)

    for _ in range(maxiter):
        if active.size == 0:
            break
        xa, ya, Ea, aa = x[active], y[active], E[active], a[active]
        hs = fd_step * scale[active]
        # base point plus one forward perturbation per tangent coordinate
        pert = np.concatenate([aa[None], aa[None] + hs[None, :, None] * np.eye(m)[:, None, :]], axis=0)
        v0 = np.einsum("bnm,sbm->sbn", Ea, pert)
        xs0 = np.broadcast_to(xa, v0.shape)
        end = integrate(manifold, xs0, v0, 1.0, steps, accel=accel).x
        F = end[0] - ya
        res = np.linalg.norm(F, axis=-1)
        residual[active] = res
        done = res <= tol
        converged[active[done]] = True
        jac = (end[1:] - end[0][None]) / hs[None, :, None]  # (m, B, n)
        jac = np.moveaxis(jac, 0, -1)  # (B, n, m)
        jtj = np.einsum("bnm,bnl->bml", jac, jac)
        jtf = np.einsum("bnm,bn->bm", jac, F)
        try:
            da = np.linalg.solve(jtj, -jtf[..., None])[..., 0]
        except np.linalg.LinAlgError:
            da = np.einsum("bmn,bn->bm", np.linalg.pinv(jac), -F)
        keep = ~done
        a[active[keep]] = aa[keep] + da[keep]
        active = active[keep]

    zeta = np.einsum("bnm,bm->bn", E, a)
    if not np.all(np.isfinite(zeta)):
        converged &= np.all(np.isfinite(zeta), axis=-1)
    if raise_on_failure and not np.all(converged):
        bad = int(np.sum(~converged))
        raise ShootingError(f"shooting did not converge for {bad} of {B} pairs "
                            f"(max residual {np.max(residual):.3e})",
                            converged.reshape(batch), residual.reshape(batch))
    return zeta.reshape(batch + (n,)), converged.reshape(batch), residual.reshape(batch)


def polyline_length(points, axis: int = 0, weight=None) -> np.ndarray:
    """Length of a polyline along ``axis``; ``weight(midpoints)`` rescales segments."""
    pts = np.moveaxis(np.asarray(points, dtype=float), axis, 0)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=-1)
    if weight is not None:
        mid = 0.5 * (pts[1:] + pts[:-1])
        seg = seg * weight(mid)
    return seg.sum(axis=0)


def path_shortening(manifold, x, y, nodes: int = 65, iterations: int = 2000, tol: float = 1e-12):
    """Discrete geodesic by iterated midpoint smoothing; returns ``(points, length)``.

    Fallback estimate of the distance when shooting fails.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.linspace(0.0, 1.0, nodes)[:, None]
    pts = manifold.retract_closest((1 - s) * x + s * y)
    for _ in range(iterations):
        new = pts.copy()
        new[1:-1] = manifold.retract_closest(0.5 * (pts[:-2] + pts[2:]))
        shift = np.max(np.abs(new - pts))
        pts = new
        if shift < tol:
            break
    return pts, float(polyline_length(pts))
