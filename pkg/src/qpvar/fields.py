"""Scalar fields on the ambient space and their intrinsic derivatives on ``M``.

Fields are given by ambient extensions (value, gradient, Hessian in ``E^n``).
Intrinsic quantities on ``M`` follow from the constraint derivatives:
the Hesse form is ``Hess f(xi, eta) + <grad f, II(xi, eta)>``.
"""

from __future__ import annotations

import numpy as np


class ScalarField:
    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


class ConstantField(ScalarField):
    def __init__(self, c: float = 0.0, ambient_dim: int = 3):
        self.c = float(c)
        self.ambient_dim = ambient_dim

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.c)

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (x.shape[-1],))

    def to_config(self):
        return {"type": "constant", "c": self.c}


class LinearField(ScalarField):
    """``<a, x> + b``."""

    def __init__(self, a, b: float = 0.0):
        self.a = np.asarray(a, dtype=float)
        self.b = float(b)

    @classmethod
    def height(cls, alpha: float, ambient_dim: int = 3):
        """``alpha * x_n`` (the last ambient coordinate)."""
        a = np.zeros(ambient_dim)
        a[-1] = alpha
        field = cls(a)
        field.alpha = float(alpha)
        return field

    def value(self, x):
        return np.asarray(x, dtype=float) @ self.a + self.b

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.a, x.shape).copy()

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (x.shape[-1],))

    def to_config(self):
        if hasattr(self, "alpha"):
            return {"type": "linear_height", "alpha": self.alpha}
        return {"type": "linear", "a": self.a.tolist(), "b": self.b}


class QuadraticField(ScalarField):
    """``x^T A x / 2 + <b, x> + c`` with symmetric ``A``."""

    def __init__(self, A, b=None, c: float = 0.0):
        A = np.asarray(A, dtype=float)
        self.A = 0.5 * (A + A.T)
        self.b = np.zeros(len(A)) if b is None else np.asarray(b, dtype=float)
        self.c = float(c)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.A, x) + x @ self.b + self.c

    def gradient(self, x):
        return np.asarray(x, dtype=float) @ self.A + self.b

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.A, x.shape + (x.shape[-1],)).copy()

    def to_config(self):
        return {"type": "quadratic", "A": self.A.tolist(), "b": self.b.tolist(), "c": self.c}


class ForceField:
    """``W(phi, x) = base(x) + sum_n Re(exp(i n.phi) <a_n, x>)``.

    Harmonic amplitudes ``a_n`` are complex ambient vectors, so every
    harmonic is linear in ``x``; smooth ``x``-dependence enters through
    ``base``.
    """

    def __init__(self, base: ScalarField, harmonics=(), k: int = 1):
        self.base = base
        self.harmonics = [(np.asarray(n, dtype=int), np.asarray(a, dtype=complex)) for n, a in harmonics]
        self.k = k if not self.harmonics else len(self.harmonics[0][0])
        if any(len(n) != self.k for n, _ in self.harmonics):
            raise ValueError("all harmonic multi-indices must have the same length")
        if self.harmonics:
            self._n = np.stack([n for n, _ in self.harmonics]).astype(float)
            self._a = np.stack([a for _, a in self.harmonics])
        else:
            self._n = np.zeros((0, self.k))
            self._a = np.zeros((0, 0), dtype=complex)

    @property
    def time_independent(self) -> bool:
        return not self.harmonics or bool(np.all(self._n == 0))

    def _forcing(self, phi, ndim_x):
        """Real ambient vector ``sum_n Re(a_n exp(i n.phi))`` of shape ``phi.shape[:-1] + (n,)``."""
        phi = np.asarray(phi, dtype=float)
        if not self.harmonics:
            return None
        theta = phi @ self._n.T  # (..., H)
        return np.cos(theta) @ self._a.real - np.sin(theta) @ self._a.imag

    def value(self, phi, x):
        x = np.asarray(x, dtype=float)
        val = self.base.value(x)
        f = self._forcing(phi, x.shape[-1])
        if f is not None:
            val = val + np.sum(f * x, -1)
        return val

    def gradient(self, phi, x):
        g = self.base.gradient(x)
        f = self._forcing(phi, np.shape(x)[-1])
        if f is not None:
            g = g + f
        return g

    def hessian(self, phi, x):
        H = self.base.hessian(x)
        if self.harmonics:
            shape = np.broadcast_shapes(np.shape(phi)[:-1], np.shape(x)[:-1])
            H = np.broadcast_to(H, shape + H.shape[-2:])
        return H

    def max_harmonic_order(self) -> int:
        return int(np.max(np.abs(self._n), initial=0))

    def to_config(self) -> dict:
        harm = [{"n": n.tolist(), "a": a.real.tolist(), "a_im": a.imag.tolist()} for n, a in self.harmonics]
        return {"base": self.base.to_config(), "harmonics": harm}


def _as_harmonics(spec_list):
    out = []
    for h in spec_list:
        a = np.asarray(h["a"], dtype=float) + 1j * np.asarray(h.get("a_im", np.zeros(len(h["a"]))), dtype=float)
        out.append((h["n"], a))
    return out


def linear_height_plus_harmonics(beta: float, harmonics, ambient_dim: int = 3, k: int = 1) -> ForceField:
    """``beta * x_n + sum Re(exp(i n.phi) <a_n, x>)``."""
    field = ForceField(LinearField.height(beta, ambient_dim), harmonics, k=k)
    field.preset = {"type": "linear_height_plus_harmonics", "beta": float(beta)}
    return field


def flat_quadratic(lam: float, harmonics, ambient_dim: int = 3, k: int = 1) -> ForceField:
    """``lam |x|^2 / 2 + sum Re(exp(i n.phi) <a_n, x>)``."""
    field = ForceField(QuadraticField(lam * np.eye(ambient_dim)), harmonics, k=k)
    field.preset = {"type": "flat_quadratic", "lambda": float(lam)}
    field.lam = float(lam)
    return field


def scalar_field_from_config(spec: dict | None, ambient_dim: int) -> ScalarField:
    if spec is None:
        return ConstantField(0.0, ambient_dim)
    kind = spec.get("type")
    if kind == "linear_height":
        return LinearField.height(spec["alpha"], ambient_dim)
    if kind == "constant":
        return ConstantField(spec.get("c", 0.0), ambient_dim)
    if kind == "linear":
        return LinearField(spec["a"], spec.get("b", 0.0))
    if kind == "quadratic":
        return QuadraticField(spec["A"], spec.get("b"), spec.get("c", 0.0))
    raise ValueError(f"unknown scalar field type {kind!r}")


def force_field_from_config(spec: dict, ambient_dim: int, k: int) -> ForceField:
    kind = spec.get("type")
    harmonics = _as_harmonics(spec.get("harmonics", []))
    if kind == "linear_height_plus_harmonics":
        return linear_height_plus_harmonics(spec["beta"], harmonics, ambient_dim, k)
    if kind == "flat_quadratic":
        return flat_quadratic(spec["lambda"], harmonics, ambient_dim, k)
    raise ValueError(f"unknown force field type {kind!r}")


# ---- intrinsic derivatives -------------------------------------------------

def intrinsic_gradient(manifold, grad, x, check: bool = True):
    """Tangent projection of an ambient gradient at ``x``."""
    return manifold.project_tangent(x, grad, check=check)


def tangent_hessian(manifold, x, grad, hess, basis=None):
    """Hesse form as an ``m x m`` matrix in an orthonormal tangent basis.

    ``E^T (H - sum_a mu_a H_a) E`` with ``mu = (J J^T)^{-1} J grad``; returns
    ``(matrix, basis)``.
    """
    x = np.asarray(x, dtype=float)
    E = manifold.tangent_basis(x) if basis is None else basis
    H = np.asarray(hess, dtype=float)
    if manifold.codim > 0:
        mu, _ = manifold._multipliers(x, np.asarray(grad, dtype=float))
        H = H - np.einsum("...c,...cij->...ij", mu, manifold.constraint_hessian(x))
    form = np.einsum("...ni,...nk,...kj->...ij", E, H, E)
    return 0.5 * (form + np.swapaxes(form, -1, -2)), E


def hesse_form(manifold, field: ScalarField, x, xi, eta, check: bool = True):
    """``<H_f(x) xi, eta>`` for tangent ``xi``, ``eta``."""
    x = manifold.check_on(x) if check else np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    quad = np.einsum("...i,...ij,...j->...", xi, field.hessian(x), eta)
    return quad + np.sum(field.gradient(x) * manifold.second_fundamental_form(x, xi, eta), -1)


def convexity_scalars(manifold, V: ScalarField, x, check: bool = True):
    """``(lambda_V, mu_V)``: minimal eigenvalues of ``H_V`` and ``G_V = H_V - grad V grad V^T / 2`` on ``T_x M``."""
    x = manifold.check_on(x) if check else np.asarray(x, dtype=float)
    grad = V.gradient(x)
    form, E = tangent_hessian(manifold, x, grad, V.hessian(x))
    g = np.einsum("...ni,...n->...i", E, grad)
    lam = np.linalg.eigvalsh(form)[..., 0]
    mu = np.linalg.eigvalsh(form - 0.5 * g[..., :, None] * g[..., None, :])[..., 0]
    return lam, mu


def lambda_W(manifold, W: ForceField, phi, x, check: bool = True):
    """Minimal eigenvalue of the Hesse form of ``W(phi, .)`` on ``T_x M``."""
    x = manifold.check_on(x) if check else np.asarray(x, dtype=float)
    grad = W.gradient(phi, x)
    x_b = np.broadcast_to(x, grad.shape)
    hess = np.broadcast_to(W.hessian(phi, x), grad.shape + grad.shape[-1:])
    form, _ = tangent_hessian(manifold, x_b, grad, hess)
    return np.linalg.eigvalsh(form)[..., 0]


def convexity_density(manifold, W: ForceField, V: ScalarField, phi, x):
    """``lambda_W(phi, x) + <grad W, grad V> / 2`` (intrinsic gradients)."""
    x = np.asarray(x, dtype=float)
    gW = W.gradient(phi, x)
    x_b = np.broadcast_to(x, gW.shape)
    gV = manifold.project_tangent(x_b, V.gradient(x_b))
    gW = manifold.project_tangent(x_b, gW)
    return lambda_W(manifold, W, phi, x_b, check=False) + 0.5 * np.sum(gW * gV, -1)


def varkappa(manifold, W: ForceField, V: ScalarField, phi_samples, x_samples):
    """Sampled minimum of ``lambda_W + <grad W, grad V>/2`` over ``phi x x`` samples.

    Returns ``(value, phi_argmin, x_argmin)``.
    """
    phi = np.asarray(phi_samples, dtype=float).reshape(-1, W.k)
    x = np.asarray(x_samples, dtype=float).reshape(-1, manifold.ambient_dim)
    if len(phi) == 0 or len(x) == 0:
        raise ValueError("varkappa needs a nonempty sample set")
    manifold.check_on(x)
    vals = convexity_density(manifold, W, V, phi[:, None, :], x[None, :, :])
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    return float(vals[i, j]), phi[i], x[j]
