"""Trigonometric polynomials on the k-torus and the directional derivative D_omega.

Two representations are used throughout the package:

* :class:`TrigPolynomial` holds complex Fourier coefficients ``c_n`` for
  multi-indices with ``|n|_inf <= N`` (box truncation), stored densely with
  index offset ``N`` along each torus axis.
* grid values, arrays of shape ``(P,)*k + (n,)`` sampled on the uniform
  tensor grid ``phi_j = 2*pi*j/P``.

``grid_transform`` converts between the two.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * np.pi


class AliasingError(ValueError):
    """Grid too coarse for the polynomial degree in use."""


@dataclass(frozen=True)
class FrequencyVector:
    omega: tuple

    def __init__(self, omega):
        arr = np.atleast_1d(np.asarray(omega, dtype=float))
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("omega must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)) or not np.any(arr != 0.0):
            raise ValueError("omega must be finite with at least one nonzero entry")
        object.__setattr__(self, "omega", tuple(float(w) for w in arr))

    @property
    def k(self) -> int:
        return len(self.omega)

    def as_array(self) -> np.ndarray:
        return np.array(self.omega)

    def resonance_margin(self, n_check: int = 8):
        """Smallest ``|n . omega|`` over ``0 < |n|_inf <= n_check`` and its argmin."""
        w = self.as_array()
        best, arg = np.inf, None
        for n in itertools.product(range(-n_check, n_check + 1), repeat=self.k):
            if not any(n):
                continue
            val = abs(float(np.dot(n, w)))
            if val < best:
                best, arg = val, n
        return best, arg


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform tensor grid on ``[0, 2*pi)^k``.

    ``normalized=True`` gives weights ``1/P^k`` (torus average); otherwise
    ``(2*pi)^k/P^k`` so that sums reproduce the unnormalized integral.
    """

    k: int
    points_per_dim: int
    normalized: bool = True

    def __post_init__(self):
        if self.k < 1 or self.points_per_dim < 1:
            raise ValueError("grid needs k >= 1 and P >= 1")

    @property
    def P(self) -> int:
        return self.points_per_dim

    @property
    def shape(self) -> tuple:
        return (self.P,) * self.k

    @property
    def size(self) -> int:
        return self.P ** self.k

    @property
    def weight(self) -> float:
        w = 1.0 / self.size
        return w if self.normalized else w * TWO_PI ** self.k

    def nodes(self) -> np.ndarray:
        """Node phases, shape ``(P,)*k + (k,)``."""
        axis = TWO_PI * np.arange(self.P) / self.P
        mesh = np.meshgrid(*([axis] * self.k), indexing="ij")
        return np.stack(mesh, axis=-1)

    def max_exact_degree(self) -> int:
        return (self.P - 1) // 2

    def require_degree(self, degree: int) -> None:
        if self.P < 2 * degree + 1:
            raise AliasingError(
                f"grid with P={self.P} cannot resolve degree {degree} (need P >= {2 * degree + 1})"
            )

    def integer_frequencies(self) -> list:
        """Per-axis integer FFT frequencies; Nyquist entries (even P) are flagged by ``nyquist_mask``."""
        return [np.rint(np.fft.fftfreq(self.P) * self.P).astype(int) for _ in range(self.k)]

    def nyquist_mask(self) -> np.ndarray:
        freqs = np.rint(np.fft.fftfreq(self.P) * self.P).astype(int)
        axis_ok = np.ones(self.P, dtype=bool)
        if self.P % 2 == 0:
            axis_ok[freqs == -self.P // 2] = False
        mask = np.ones(self.shape, dtype=bool)
        for d in range(self.k):
            shape = [1] * self.k
            shape[d] = self.P
            mask = mask & axis_ok.reshape(shape)
        return mask

    def symbol(self, omega: FrequencyVector) -> np.ndarray:
        """``n . omega`` on the FFT layout, shape ``(P,)*k``; Nyquist modes set to 0."""
        if omega.k != self.k:
            raise ValueError(f"omega has k={omega.k}, grid has k={self.k}")
        freqs = np.rint(np.fft.fftfreq(self.P) * self.P)
        mesh = np.meshgrid(*([freqs] * self.k), indexing="ij")
        sym = sum(w * m for w, m in zip(omega.omega, mesh))
        return np.where(self.nyquist_mask(), sym, 0.0)


class TrigPolynomial:
    """Real-valued trigonometric polynomial ``T^k -> E^n``.

    ``coefficients`` has shape ``(2N+1,)*k + (n,)`` and entry ``[n + N]`` is
    the complex vector ``c_n``. Conjugate symmetry ``c_{-n} = conj(c_n)`` is
    enforced on construction by symmetrization.
    """

    def __init__(self, coefficients, symmetrize: bool = True):
        c = np.array(coefficients, dtype=complex)
        if c.ndim < 2:
            raise ValueError("coefficients need at least one torus axis and one ambient axis")
        k = c.ndim - 1
        size = c.shape[0]
        if any(s != size for s in c.shape[:k]) or size % 2 != 1:
            raise ValueError("torus axes must all have odd length 2N+1")
        if symmetrize:
            flipped = np.conj(c[(slice(None, None, -1),) * k])
            c = 0.5 * (c + flipped)
        c.setflags(write=False)
        self._c = c

    @classmethod
    def zeros(cls, k: int, ambient_dim: int, degree: int) -> "TrigPolynomial":
        return cls(np.zeros((2 * degree + 1,) * k + (ambient_dim,), dtype=complex))

    @classmethod
    def constant(cls, value, k: int, degree: int = 0) -> "TrigPolynomial":
        value = np.asarray(value, dtype=float)
        c = np.zeros((2 * degree + 1,) * k + value.shape, dtype=complex)
        c[(degree,) * k] = value
        return cls(c)

    @classmethod
    def from_dict(cls, terms: dict, k: int, ambient_dim: int, degree: int | None = None) -> "TrigPolynomial":
        """Build from ``{multi_index: complex vector}``; the conjugate partner is filled in."""
        if degree is None:
            degree = max((max(abs(i) for i in n) for n in terms), default=0)
        c = np.zeros((2 * degree + 1,) * k + (ambient_dim,), dtype=complex)
        for n, vec in terms.items():
            n = tuple(int(i) for i in n)
            if len(n) != k:
                raise ValueError(f"multi-index {n} has wrong length for k={k}")
            if max(abs(i) for i in n) > degree:
                raise ValueError(f"multi-index {n} exceeds degree {degree}")
            vec = np.asarray(vec, dtype=complex)
            pos = tuple(i + degree for i in n)
            neg = tuple(-i + degree for i in n)
            if pos == neg:
                c[pos] += vec.real
            else:
                c[pos] += vec
                c[neg] += np.conj(vec)
        return cls(c, symmetrize=False)

    @classmethod
    def random(cls, k: int, ambient_dim: int, degree: int, rng: np.random.Generator,
               scale: float = 1.0, decay: float = 0.0) -> "TrigPolynomial":
        shape = (2 * degree + 1,) * k + (ambient_dim,)
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        if decay:
            idx = np.indices(shape[:k]) - degree
            order = np.max(np.abs(idx), axis=0)
            c = c * np.exp(-decay * order)[..., None]
        return cls(scale * c)

    @property
    def coefficients(self) -> np.ndarray:
        return self._c

    @property
    def k(self) -> int:
        return self._c.ndim - 1

    @property
    def degree(self) -> int:
        return (self._c.shape[0] - 1) // 2

    @property
    def ambient_dim(self) -> int:
        return self._c.shape[-1]

    def coefficient(self, n) -> np.ndarray:
        pos = tuple(int(i) + self.degree for i in n)
        if any(p < 0 or p >= self._c.shape[0] for p in pos):
            return np.zeros(self.ambient_dim, dtype=complex)
        return self._c[pos]

    def multi_indices(self) -> np.ndarray:
        """Integer multi-indices aligned with the coefficient layout, shape ``(2N+1,)*k + (k,)``."""
        idx = np.indices(self._c.shape[:-1]) - self.degree
        return np.moveaxis(idx, 0, -1)

    def truncate(self, degree: int) -> "TrigPolynomial":
        if degree >= self.degree:
            return self.pad(degree)
        lo, hi = self.degree - degree, self.degree + degree + 1
        return TrigPolynomial(self._c[(slice(lo, hi),) * self.k], symmetrize=False)

    def pad(self, degree: int) -> "TrigPolynomial":
        if degree < self.degree:
            raise ValueError("pad cannot shrink the degree; use truncate")
        extra = degree - self.degree
        width = [(extra, extra)] * self.k + [(0, 0)]
        return TrigPolynomial(np.pad(self._c, width), symmetrize=False)

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        deg = max(self.degree, other.degree)
        return TrigPolynomial(self.pad(deg)._c + other.pad(deg)._c, symmetrize=False)

    def __sub__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        return self + (-1.0) * other

    def __mul__(self, alpha: float) -> "TrigPolynomial":
        return TrigPolynomial(float(alpha) * self._c, symmetrize=False)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"TrigPolynomial(k={self.k}, ambient_dim={self.ambient_dim}, degree={self.degree})"

    def to_records(self) -> list:
        records = []
        for n in itertools.product(range(-self.degree, self.degree + 1), repeat=self.k):
            c = self.coefficient(n)
            if np.any(c != 0):
                records.append({"n": list(n), "re": c.real.tolist(), "im": c.imag.tolist()})
        return records

    @classmethod
    def from_records(cls, records: list, k: int | None = None, ambient_dim: int | None = None) -> "TrigPolynomial":
        if not records:
            if k is None or ambient_dim is None:
                raise ValueError("empty coefficient list needs explicit k and ambient_dim")
            return cls.zeros(k, ambient_dim, 0)
        k = len(records[0]["n"]) if k is None else k
        ambient_dim = len(records[0]["re"]) if ambient_dim is None else ambient_dim
        degree = max(max(abs(i) for i in r["n"]) for r in records)
        c = np.zeros((2 * degree + 1,) * k + (ambient_dim,), dtype=complex)
        for r in records:
            pos = tuple(i + degree for i in r["n"])
            c[pos] = np.asarray(r["re"], dtype=float) + 1j * np.asarray(r["im"], dtype=float)
        return cls(c, symmetrize=False)


def _check_phi(u: TrigPolynomial, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1:] != (u.k,):
        raise ValueError(f"phi has trailing dimension {phi.shape[-1:]} but torus dimension is {u.k}")
    return phi


def evaluate(u: TrigPolynomial, phi) -> np.ndarray:
    """Value of ``u`` at phase(s) ``phi`` of shape ``(..., k)``; returns ``(..., n)``."""
    phi = _check_phi(u, phi)
    batch = phi.shape[:-1]
    flat = phi.reshape(-1, u.k)
    modes = np.arange(-u.degree, u.degree + 1)
    acc = None
    for d in range(u.k):
        e = np.exp(1j * np.outer(flat[:, d], modes))
        if acc is None:
            acc = np.tensordot(e, u.coefficients, axes=([1], [0]))
        else:
            acc = np.einsum("bm,bm...->b...", e, acc)
    return acc.real.reshape(batch + (u.ambient_dim,))


def d_omega(u: TrigPolynomial, omega: FrequencyVector) -> TrigPolynomial:
    """Coefficients ``i (n . omega) c_n``."""
    if omega.k != u.k:
        raise ValueError(f"omega has k={omega.k}, polynomial has k={u.k}")
    sym = u.multi_indices() @ omega.as_array()
    return TrigPolynomial(1j * sym[..., None] * u.coefficients, symmetrize=False)


def to_grid(u: TrigPolynomial, grid: QuadratureGrid) -> np.ndarray:
    """Synthesize grid values, shape ``(P,)*k + (n,)``."""
    if grid.k != u.k:
        raise ValueError(f"grid has k={grid.k}, polynomial has k={u.k}")
    grid.require_degree(u.degree)
    spec = np.zeros(grid.shape + (u.ambient_dim,), dtype=complex)
    idx = np.indices(u.coefficients.shape[:-1]) - u.degree
    spec[tuple(i % grid.P for i in idx)] = u.coefficients
    axes = tuple(range(u.k))
    return np.fft.ifftn(spec, axes=axes).real * grid.size


def from_grid(values, grid: QuadratureGrid, degree: int | None = None) -> TrigPolynomial:
    """Analyze grid values into a degree-``degree`` polynomial (default: largest exact degree)."""
    values = np.asarray(values, dtype=float)
    if values.shape[: grid.k] != grid.shape:
        raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
    degree = grid.max_exact_degree() if degree is None else degree
    grid.require_degree(degree)
    axes = tuple(range(grid.k))
    spec = np.fft.fftn(values, axes=axes) / grid.size
    modes = np.arange(-degree, degree + 1) % grid.P
    c = spec[np.ix_(*([modes] * grid.k))]
    return TrigPolynomial(c)


def grid_transform(data, grid: QuadratureGrid, degree: int | None = None):
    """Convert a :class:`TrigPolynomial` to grid values or grid values to a polynomial."""
    if isinstance(data, TrigPolynomial):
        return to_grid(data, grid)
    return from_grid(data, grid, degree)


def apply_symbol(values, grid: QuadratureGrid, multiplier) -> np.ndarray:
    """Multiply the grid-value spectrum by ``multiplier`` (shape ``(P,)*k``) and return to the grid.

    Leading batch axes are allowed: ``values`` is ``(..., P,...,P, n)``.
    """
    values = np.asarray(values)
    k = grid.k
    axes = tuple(range(values.ndim - k - 1, values.ndim - 1))
    spec = np.fft.fftn(values, axes=axes)
    spec = spec * multiplier[..., None]
    out = np.fft.ifftn(spec, axes=axes)
    return out.real


def d_omega_grid(values, grid: QuadratureGrid, omega: FrequencyVector) -> np.ndarray:
    """Spectral ``D_omega`` of grid values (trigonometric interpolant)."""
    return apply_symbol(values, grid, 1j * grid.symbol(omega))


def d_omega2_grid(values, grid: QuadratureGrid, omega: FrequencyVector) -> np.ndarray:
    """Spectral ``D_omega^2`` of grid values."""
    sym = grid.symbol(omega)
    return apply_symbol(values, grid, -(sym ** 2))


def grid_average(values, grid: QuadratureGrid) -> np.ndarray:
    """Quadrature over the trailing ``k`` axes of ``values``."""
    values = np.asarray(values)
    axes = tuple(range(values.ndim - grid.k, values.ndim))
    return values.sum(axis=axes) * grid.weight


def _grid_for(u: TrigPolynomial, v: TrigPolynomial, grid: QuadratureGrid) -> None:
    if u.k != v.k or u.ambient_dim != v.ambient_dim:
        raise ValueError("polynomials differ in torus or ambient dimension")
    if grid.k != u.k:
        raise ValueError("grid dimension does not match polynomials")
    grid.require_degree(max(u.degree, v.degree))


def inner0(u: TrigPolynomial, v: TrigPolynomial, grid: QuadratureGrid) -> float:
    """``<u, v>_0`` by exact grid quadrature (normalized or not per the grid flag)."""
    _grid_for(u, v, grid)
    prod = np.sum(to_grid(u, grid) * to_grid(v, grid), axis=-1)
    return float(grid_average(prod, grid))


def parseval(u: TrigPolynomial, v: TrigPolynomial | None = None) -> float:
    """Coefficient-space ``sum_n <u_n, conj(v_n)>`` (normalized convention)."""
    v = u if v is None else v
    deg = max(u.degree, v.degree)
    a, b = u.pad(deg).coefficients, v.pad(deg).coefficients
    return float(np.sum(a * np.conj(b)).real)


def norm1(u: TrigPolynomial, omega: FrequencyVector, grid: QuadratureGrid) -> float:
    du = d_omega(u, omega)
    return float(np.sqrt(inner0(du, du, grid) + inner0(u, u, grid)))


def besicovitch_sample(u: TrigPolynomial, omega: FrequencyVector, t) -> np.ndarray:
    """``x(t) = u(omega t mod 2 pi)``; ``t`` scalar or 1-d array."""
    t = np.asarray(t, dtype=float)
    phase = np.mod(np.multiply.outer(t, omega.as_array()), TWO_PI)
    return evaluate(u, phase)


def write_coefficients_json(u: TrigPolynomial, path, extra: dict | None = None) -> None:
    payload = {"k": u.k, "ambient_dim": u.ambient_dim, "degree": u.degree,
               "coefficients": u.to_records()}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2))


def read_coefficients_json(path) -> tuple:
    """Return ``(polynomial, payload)`` from a coefficient file."""
    payload = json.loads(Path(path).read_text())
    u = TrigPolynomial.from_records(payload["coefficients"], payload.get("k"), payload.get("ambient_dim"))
    if "degree" in payload and payload["degree"] > u.degree:
        u = u.pad(int(payload["degree"]))
    return u, payload


def write_grid_csv(values, grid: QuadratureGrid, path) -> None:
    values = np.asarray(values)
    nodes = grid.nodes().reshape(-1, grid.k)
    flat = values.reshape(-1, values.shape[-1])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"phi_{i + 1}" for i in range(grid.k)] + [f"x_{i + 1}" for i in range(flat.shape[1])])
        for phi, x in zip(nodes, flat):
            w.writerow([repr(float(p)) for p in phi] + [repr(float(v)) for v in x])
