"""Averaged Lagrangian, its first variation and the weak-solution residual.

Maps ``T^k -> M`` are represented by their values on a ``P^k`` collocation
grid (``P`` odd); ``D_omega`` acts spectrally on the grid interpolant, whose
degree is ``(P - 1) // 2``. Averages are normalized by ``(2 pi)^-k`` unless
``unnormalized`` is requested.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from . import torus_spectral as ts
from .fields import ForceField, ScalarField


class ConstraintViolation(ValueError):
    pass


@dataclass
class Problem:
    manifold: object
    omega: ts.FrequencyVector
    W: ForceField
    grid: ts.QuadratureGrid
    V: ScalarField | None = None
    domain: object | None = None
    tol_on: float = 1e-8

    def __post_init__(self):
        if self.grid.k != self.omega.k or self.W.k != self.omega.k:
            raise ValueError("torus dimension mismatch between omega, W and the grid")
        if self.grid.P % 2 == 0:
            raise ValueError("use an odd number of points per dimension")

    @property
    def degree(self) -> int:
        return (self.grid.P - 1) // 2

    @property
    def k(self) -> int:
        return self.omega.k

    @property
    def ambient_dim(self) -> int:
        return self.manifold.ambient_dim

    def nodes(self):
        return self.grid.nodes()

    def symbol(self):
        return self.grid.symbol(self.omega)

    # grid-value <-> polynomial
    def to_poly(self, U) -> ts.TrigPolynomial:
        return ts.from_grid(U, self.grid)

    def from_poly(self, u: ts.TrigPolynomial) -> np.ndarray:
        return ts.to_grid(u, self.grid)


def _avg(values, grid, unnormalized=False):
    out = ts.grid_average(values, grid)
    return out * ts.TWO_PI ** grid.k if unnormalized else out


def check_on_manifold(problem: Problem, U):
    res = float(np.max(problem.manifold.residual(U), initial=0.0))
    if res > problem.tol_on:
        raise ConstraintViolation(f"grid values off the manifold (residual {res:.3e})")


def d_omega(problem: Problem, U):
    """``D_omega`` applied to grid values (trailing ambient axis)."""
    return ts.apply_symbol(U, problem.grid, 1j * problem.symbol())


def kinetic_density(problem: Problem, U):
    DU = d_omega(problem, U)
    return 0.5 * np.sum(DU * DU, -1)


def kinetic_norm2(problem: Problem, U) -> float:
    """``||D_omega u||_0^2``."""
    return float(2 * _avg(kinetic_density(problem, U), problem.grid))


def J(problem: Problem, U, check: bool = True, unnormalized: bool = False) -> float:
    """Average of ``|D_omega u|^2 / 2 + W(phi, u)`` over the grid."""
    U = np.asarray(U, dtype=float)
    if check:
        check_on_manifold(problem, U)
    dens = kinetic_density(problem, U) + problem.W.value(problem.nodes(), U)
    return float(_avg(dens, problem.grid, unnormalized))


def tangent_check(problem: Problem, U, H, tol: float = 1e-8):
    normal = problem.manifold.project_normal(U, H)
    if np.max(np.abs(normal), initial=0.0) > tol * max(1.0, float(np.max(np.abs(H), initial=0.0))):
        raise ValueError("variation is not tangent to the manifold along u")


def j_prime(problem: Problem, U, H, check: bool = True, unnormalized: bool = False):
    """``<D u, D h>_0 + <grad_x W(phi, u), h>_0``; ``H`` may carry leading batch axes."""
    U = np.asarray(U, dtype=float)
    H = np.asarray(H, dtype=float)
    if check:
        check_on_manifold(problem, U)
        tangent_check(problem, U, H)
    DU = d_omega(problem, U)
    DH = d_omega(problem, H)
    gW = problem.W.gradient(problem.nodes(), U)
    dens = np.sum(DU * DH, -1) + np.sum(gW * H, -1)
    return _avg(dens, problem.grid, unnormalized)


def euclidean_gradient(problem: Problem, U):
    """Ambient ``L^2`` gradient ``-D_omega^2 u + grad_x W`` at every node."""
    D2U = ts.apply_symbol(U, problem.grid, -problem.symbol() ** 2)
    return -D2U + problem.W.gradient(problem.nodes(), U)


def riemannian_gradient(problem: Problem, U):
    return problem.manifold.project_tangent(U, euclidean_gradient(problem, U))


def norm1_grid(problem: Problem, H):
    """``H^1_omega`` norm of grid fields (leading batch axes allowed)."""
    DH = d_omega(problem, H)
    dens = np.sum(DH * DH, -1) + np.sum(H * H, -1)
    return np.sqrt(_avg(dens, problem.grid))


def half_multi_indices(k: int, N: int):
    """One representative of each pair ``{n, -n}`` with ``|n|_inf <= N`` (``n = 0`` included)."""
    out = []
    for n in itertools.product(range(-N, N + 1), repeat=k):
        nz = [c for c in n if c != 0]
        if not nz or nz[0] > 0:
            out.append(n)
    return out


@dataclass
class ResidualTable:
    rows: list  # (n, component, parity, residual, h_norm1)
    test_degree: int

    @property
    def max_residual(self) -> float:
        return max((r[3] for r in self.rows), default=0.0)

    def worst(self):
        return max(self.rows, key=lambda r: r[3]) if self.rows else None

    def write_csv(self, path):
        k = len(self.rows[0][0]) if self.rows else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"n_{i + 1}" for i in range(k)] + ["component", "parity", "residual", "h_norm1"])
            for n, comp, parity, res, hn in self.rows:
                w.writerow(list(n) + [comp, parity, repr(res), repr(hn)])


def weak_residual(problem: Problem, U, test_degree: int, skip_below: float = 1e-12):
    """``max |J'[u](h)| / ||h||_1`` over ``h = P_T(u) e_i {cos, sin}(n.phi)``, ``|n|_inf <= test_degree``.

    Returns ``(max_residual, ResidualTable)``.
    """
    U = np.asarray(U, dtype=float)
    man = problem.manifold
    n_amb = problem.ambient_dim
    phi = problem.nodes()
    eye = np.eye(n_amb)
    PT = man.project_tangent(U[..., None, :], eye)  # (..., i, n): row i is P_T e_i
    idx = half_multi_indices(problem.k, test_degree)
    theta = np.tensordot(phi, np.asarray(idx, dtype=float).T, axes=([-1], [0]))  # grid + (T,)
    labels, trig = [], []
    for t, n in enumerate(idx):
        parities = ["cos"] if not any(n) else ["cos", "sin"]
        for par in parities:
            f = np.cos(theta[..., t]) if par == "cos" else np.sin(theta[..., t])
            for i in range(n_amb):
                labels.append((tuple(n), i + 1, par))
                trig.append((f, i))
    # batch of test fields, shape (B,) + grid + (n,)
    H = np.stack([f[..., None] * PT[..., i, :] for f, i in trig])
    num = j_prime(problem, U, H, check=False)
    den = norm1_grid(problem, H)
    rows = []
    for (n, comp, par), a, b in zip(labels, num, den):
        if b < skip_below:
            continue
        rows.append((n, comp, par, float(abs(a) / b), float(b)))
    table = ResidualTable(rows, test_degree)
    return table.max_residual, table


def convexity_gap(problem: Problem, cs, U0, U1, varkappa: float, c: float, return_parts: bool = False):
    """``J[u1] - J[u0] - J'[u0](h)`` with ``h = chi'_s(0, u0, u1)`` and the bound ``varkappa c^2/2 avg rho^2``."""
    U0 = np.asarray(U0, dtype=float)
    U1 = np.asarray(U1, dtype=float)
    _, h = cs.connecting_chi(U0, U1, [0.0])
    h = h[..., 0, :]
    gap = J(problem, U1) - J(problem, U0) - float(j_prime(problem, U0, h, check=False))
    rho = problem.manifold.distance_rho(U0.reshape(-1, problem.ambient_dim), U1.reshape(-1, problem.ambient_dim))
    rho = np.asarray(rho).reshape(U0.shape[:-1])
    bound = 0.5 * varkappa * c ** 2 * float(_avg(rho ** 2, problem.grid))
    if return_parts:
        return gap, bound, h, rho
    return gap, bound


def m_bound(W: ForceField, omega_samples, phi_grid: ts.QuadratureGrid) -> float:
    """``2 sup_x avg_phi W - 2 avg_phi inf_x W`` over sampled ``x`` and a ``phi`` grid."""
    x = np.asarray(omega_samples, dtype=float)
    phi = phi_grid.nodes().reshape(-1, phi_grid.k)
    vals = W.value(phi[:, None, :], x[None, :, :])  # (phi, x)
    sup_avg = np.max(np.mean(vals, axis=0))
    avg_inf = np.mean(np.min(vals, axis=1))
    return float(2 * sup_avg - 2 * avg_inf)
