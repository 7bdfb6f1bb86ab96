import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpvar import torus_spectral as ts

OMEGA = ts.FrequencyVector([1.0, np.sqrt(2.0)])


def direct_sum(u, phi):
    # term-by-term oracle
    out = np.zeros(u.ambient_dim, dtype=complex)
    N = u.degree
    for n in itertools.product(range(-N, N + 1), repeat=u.k):
        out += u.coefficient(n) * np.exp(1j * np.dot(n, phi))
    return out


def cos1():
    return ts.TrigPolynomial.from_dict({(1, 0): [0.5, 0, 0]}, 2, 3)


def test_frequency_vector_validation():
    with pytest.raises(ValueError):
        ts.FrequencyVector([0.0, 0.0])
    with pytest.raises(ValueError):
        ts.FrequencyVector([1.0, np.inf])
    margin, n = OMEGA.resonance_margin(8)
    assert margin > 0
    assert np.isclose(abs(np.dot(n, OMEGA.omega)), margin)


def test_evaluate_constant_and_cos():
    c = ts.TrigPolynomial.constant([1.5, -2.0, 0.25], 2, degree=2)
    assert np.allclose(ts.evaluate(c, [0.3, 2.0]), [1.5, -2.0, 0.25])
    assert np.allclose(ts.evaluate(cos1(), [0.0, 0.0]), [1, 0, 0])


def test_evaluate_matches_direct_sum(rng):
    u = ts.TrigPolynomial.random(2, 3, 3, rng)
    for _ in range(5):
        phi = rng.uniform(0, 2 * np.pi, 2)
        ref = direct_sum(u, phi)
        assert np.max(np.abs(ref.imag)) < 1e-12
        assert np.allclose(ts.evaluate(u, phi), ref.real, atol=1e-12, rtol=0)


def test_evaluate_rejects_bad_phi():
    with pytest.raises(ValueError):
        ts.evaluate(cos1(), [0.0, 0.0, 0.0])


def test_conjugate_symmetry_is_enforced(rng):
    u = ts.TrigPolynomial.random(2, 2, 2, rng)
    c = u.coefficients
    assert np.allclose(c[::-1, ::-1], np.conj(c))


def test_d_omega_rules(rng):
    c = ts.TrigPolynomial.constant([1.0, 2.0, 3.0], 2, 2)
    assert np.allclose(ts.d_omega(c, OMEGA).coefficients, 0)
    du = ts.d_omega(cos1(), OMEGA)
    for phi in rng.uniform(0, 2 * np.pi, (5, 2)):
        assert np.allclose(ts.evaluate(du, phi), [-np.sin(phi[0]), 0, 0], atol=1e-14)
    with pytest.raises(ValueError):
        ts.d_omega(c, ts.FrequencyVector([1.0]))


def test_d_omega_flow_finite_difference(rng):
    u = ts.TrigPolynomial.random(2, 3, 4, rng)
    du = ts.d_omega(u, OMEGA)
    w = OMEGA.as_array()
    h = 1e-5
    for phi in rng.uniform(0, 2 * np.pi, (10, 2)):
        fd = (ts.evaluate(u, phi + h * w) - ts.evaluate(u, phi - h * w)) / (2 * h)
        ex = ts.evaluate(du, phi)
        assert np.linalg.norm(fd - ex) <= 1e-6 * np.linalg.norm(ex)


def test_inner0_examples(rng):
    g = ts.QuadratureGrid(2, 9)
    a = ts.TrigPolynomial.constant([1.0, 2.0, 0.0], 2, 1)
    b = ts.TrigPolynomial.constant([3.0, -1.0, 5.0], 2, 1)
    assert np.isclose(ts.inner0(a, b, g), 1.0)
    e1 = ts.TrigPolynomial.from_dict({(1, 0): [1.0, 0, 0]}, 2, 3, 2)
    e2 = ts.TrigPolynomial.from_dict({(0, 2): [1.0, 0, 0]}, 2, 3, 2)
    assert abs(ts.inner0(e1, e2, g)) < 1e-14


def test_inner0_rejects_inexact_grid(rng):
    u = ts.TrigPolynomial.random(2, 3, 4, rng)
    with pytest.raises(ts.AliasingError):
        ts.inner0(u, u, ts.QuadratureGrid(2, 8))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), N=st.integers(0, 5), k=st.integers(1, 3))
def test_parseval(seed, N, k):
    rng = np.random.default_rng(seed)
    u = ts.TrigPolynomial.random(k, 2, N, rng)
    g = ts.QuadratureGrid(k, 2 * N + 1)
    ref = float(np.sum(np.abs(u.coefficients) ** 2))
    assert abs(ts.inner0(u, u, g) - ref) <= 1e-12 * max(1.0, ref)
    assert abs(ts.parseval(u) - ref) <= 1e-12 * max(1.0, ref)


def test_norm1_examples(rng):
    g = ts.QuadratureGrid(2, 9)
    c = ts.TrigPolynomial.constant([3.0, 4.0, 0.0], 2, 1)
    assert np.isclose(ts.norm1(c, OMEGA, g), 5.0)
    assert np.isclose(ts.norm1(cos1().pad(1), OMEGA, g), 1.0)
    u = ts.TrigPolynomial.random(2, 3, 3, rng)
    assert np.isclose(ts.norm1(-2.5 * u, OMEGA, g), 2.5 * ts.norm1(u, OMEGA, g))
    assert ts.norm1(u, OMEGA, g) >= np.sqrt(ts.inner0(u, u, g))


def test_grid_transform_examples(rng):
    g = ts.QuadratureGrid(2, 7)
    vals = np.full(g.shape + (2,), 0.7)
    u = ts.from_grid(vals, g)
    c = u.coefficients.copy()
    assert np.allclose(c[u.degree, u.degree], 0.7)
    c[u.degree, u.degree] = 0
    assert np.max(np.abs(c)) < 1e-14
    phi = g.nodes()
    u = ts.from_grid(np.cos(phi[..., 1:2]), g)
    assert np.allclose(u.coefficient((0, 1)), 0.5, atol=1e-12)
    assert np.allclose(u.coefficient((0, -1)), 0.5, atol=1e-12)
    other = u.coefficients.copy()
    other[u.degree, u.degree + 1] = other[u.degree, u.degree - 1] = 0
    assert np.max(np.abs(other)) < 1e-12


@pytest.mark.parametrize("k,N", [(1, 6), (2, 4), (3, 2)])
def test_grid_round_trip(rng, k, N):
    u = ts.TrigPolynomial.random(k, 3, N, rng)
    g = ts.QuadratureGrid(k, 2 * N + 1)
    vals = ts.to_grid(u, g)
    back = ts.from_grid(vals, g, N)
    assert np.max(np.abs(back.coefficients - u.coefficients)) < 1e-12
    assert np.max(np.abs(ts.to_grid(back, g) - vals)) < 1e-12
    direct = ts.evaluate(u, g.nodes())
    assert np.max(np.abs(direct - vals)) < 1e-12


def test_grid_transform_rejects_aliasing(rng):
    u = ts.TrigPolynomial.random(2, 3, 4, rng)
    with pytest.raises(ts.AliasingError):
        ts.to_grid(u, ts.QuadratureGrid(2, 7))


def test_besicovitch_sample(rng):
    u = cos1()
    assert np.allclose(ts.besicovitch_sample(u, OMEGA, 0.0), ts.evaluate(u, [0, 0]))
    assert np.allclose(ts.besicovitch_sample(u, OMEGA, np.pi), [-1, 0, 0])
    v = ts.TrigPolynomial.random(2, 3, 3, rng)
    for t in rng.uniform(-50, 50, 5):
        phase = np.mod(OMEGA.as_array() * t, 2 * np.pi)
        assert np.allclose(ts.besicovitch_sample(v, OMEGA, t), ts.evaluate(v, phase), atol=1e-12)


def test_d_omega_annihilates_mean_and_commutes_with_truncation(rng):
    u = ts.TrigPolynomial.random(2, 3, 5, rng)
    du = ts.d_omega(u, OMEGA)
    assert np.allclose(du.coefficient((0, 0)), 0)
    for N in range(6):
        a = ts.d_omega(u.truncate(N), OMEGA).coefficients
        b = ts.d_omega(u, OMEGA).truncate(N).coefficients
        assert np.allclose(a, b)
    v = ts.TrigPolynomial.random(2, 3, 5, rng)
    lin = ts.d_omega(2 * u + v, OMEGA).coefficients
    assert np.allclose(lin, 2 * du.coefficients + ts.d_omega(v, OMEGA).coefficients)


def test_truncation_monotone_kinetic_norm(rng):
    u = ts.TrigPolynomial.random(2, 3, 6, rng)
    g = ts.QuadratureGrid(2, 13)
    norms = []
    for N in range(7):
        du = ts.d_omega(u.truncate(N), OMEGA)
        norms.append(ts.inner0(du, du, g))
    assert all(b >= a - 1e-14 for a, b in zip(norms, norms[1:]))


def test_coefficient_json_round_trip(tmp_path, rng):
    u = ts.TrigPolynomial.random(2, 3, 2, rng)
    path = tmp_path / "u.json"
    ts.write_coefficients_json(u, path, {"omega": [1.0, 2.0]})
    records = json.loads(path.read_text())["coefficients"]
    assert set(records[0]) == {"n", "re", "im"}
    back, payload = ts.read_coefficients_json(path)
    assert payload["omega"] == [1.0, 2.0]
    assert np.allclose(back.coefficients, u.coefficients)


def test_grid_csv(tmp_path, rng):
    g = ts.QuadratureGrid(2, 3)
    vals = rng.standard_normal(g.shape + (3,))
    path = tmp_path / "grid.csv"
    ts.write_grid_csv(vals, g, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "phi_1,phi_2,x_1,x_2,x_3"
    assert len(lines) == 10
