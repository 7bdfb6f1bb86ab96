import numpy as np
import pytest

from qpvar import fields as F
from qpvar import torus_spectral as ts
from qpvar.domain import FlatBoxDomain, SublevelDomain
from qpvar.lagrangian import Problem
from qpvar.manifolds import FlatSpace, Sphere

OMEGA = ts.FrequencyVector([1.0, np.sqrt(2.0)])
ALPHA = 3.0
LEVEL = -2.85
FORCING = 0.05


def sphere_harmonics(amplitude=FORCING):
    return [((1, 0), [amplitude, 0, 0]), ((0, 1), [0, amplitude, 0]), ((1, 1), [0, 0, amplitude])]


def flat_harmonics():
    return [((1, 0), [1.0, 0, 0]), ((0, 1), [0, 1.0, 0]), ((1, 1), [0, 0, 1.0])]


def sphere_setup(beta=1.0, amplitude=FORCING, P=13):
    M = Sphere()
    V = F.LinearField.height(ALPHA)
    W = F.linear_height_plus_harmonics(beta, sphere_harmonics(amplitude) if amplitude else [], 3, 2)
    D = SublevelDomain(M, V, LEVEL, [0.0, 0.0, -1.0], 0.05, 0.1, 0.025)
    problem = Problem(M, OMEGA, W, ts.QuadratureGrid(2, P), V=V, domain=D)
    return problem, D


def flat_setup(P=17, lam=1.0):
    W = F.flat_quadratic(lam, flat_harmonics(), 3, 2)
    D = FlatBoxDomain([-2.0] * 3, [2.0] * 3)
    return Problem(FlatSpace(3), OMEGA, W, ts.QuadratureGrid(2, P), domain=D), D


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sphere():
    return sphere_setup()


@pytest.fixture(scope="session")
def flat():
    return flat_setup()
