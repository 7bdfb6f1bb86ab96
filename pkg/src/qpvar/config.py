"""Scenario files: JSON with a versioned ``schema`` field."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fields as F
from . import torus_spectral as ts
from .domain import FlatBoxDomain, SamplingConfig, SublevelDomain
from .lagrangian import Problem
from .manifolds import manifold_from_config
from .solver import SolverConfig

SCHEMA = "qpvar-scenario/1"


class ConfigError(ValueError):
    def __init__(self, message, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise ConfigError("expected an object", where)
    if key not in d:
        raise ConfigError("missing required field", f"{where}.{key}" if where else key)
    return d[key]


def _vector(value, where: str, length: int | None = None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a list of numbers", where) from None
    if arr.ndim != 1 or (length is not None and arr.size != length):
        want = f" of length {length}" if length is not None else ""
        raise ConfigError(f"expected a flat list of numbers{want}", where)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("non-finite entry", where)
    return arr


@dataclass
class Scenario:
    name: str
    manifold: object
    omega: ts.FrequencyVector
    V: F.ScalarField
    W: F.ForceField
    domain: object
    solver: SolverConfig
    sampling: SamplingConfig
    outputs: dict = field(default_factory=dict)
    geodesic: dict = field(default_factory=dict)
    seed: int = 0
    raw: dict = field(default_factory=dict)

    def problem(self) -> Problem:
        grid = ts.QuadratureGrid(self.omega.k, self.solver.points_per_dim)
        return Problem(self.manifold, self.omega, self.W, grid, V=self.V, domain=self.domain)


def parse_scenario(data: dict, seed_override: int | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    schema = _require(data, "schema", "")
    if schema != SCHEMA:
        raise ConfigError(f"unsupported schema {schema!r} (expected {SCHEMA!r})", "schema")
    seed = int(data.get("seed", 0)) if seed_override is None else int(seed_override)

    mspec = _require(data, "manifold", "")
    try:
        manifold = manifold_from_config(mspec)
    except (ValueError, KeyError, TypeError) as err:
        raise ConfigError(str(err), "manifold") from None
    n = manifold.ambient_dim

    omega_arr = _vector(_require(data, "omega", ""), "omega")
    if omega_arr.size == 0 or not np.any(omega_arr != 0):
        raise ConfigError("omega needs at least one nonzero entry", "omega")
    omega = ts.FrequencyVector(omega_arr)
    k = omega.k

    try:
        V = F.scalar_field_from_config(data.get("V"), n)
    except (ValueError, KeyError, TypeError) as err:
        raise ConfigError(str(err), "V") from None

    wspec = _require(data, "W", "")
    for i, h in enumerate(wspec.get("harmonics", []) if isinstance(wspec, dict) else []):
        where = f"W.harmonics[{i}]"
        nvec = _require(h, "n", where)
        if not isinstance(nvec, list) or len(nvec) != k or not all(isinstance(c, int) for c in nvec):
            raise ConfigError(f"expected {k} integers", where + ".n")
        _vector(_require(h, "a", where), where + ".a", n)
        if "a_im" in h:
            _vector(h["a_im"], where + ".a_im", n)
    try:
        W = F.force_field_from_config(wspec, n, k)
    except (ValueError, KeyError, TypeError) as err:
        raise ConfigError(str(err), "W") from None

    dspec = data.get("domain")
    domain = None
    if dspec is not None:
        if dspec.get("type") == "flat_box":
            try:
                domain = FlatBoxDomain(_vector(_require(dspec, "lower", "domain"), "domain.lower", n),
                                       _vector(_require(dspec, "upper", "domain"), "domain.upper", n))
            except ValueError as err:
                raise ConfigError(str(err), "domain") from None
        else:
            args = {key: _require(dspec, key, "domain") for key in ("v", "seed", "delta", "delta0", "epsilon")}
            try:
                domain = SublevelDomain(manifold, V, float(args["v"]), _vector(args["seed"], "domain.seed", n),
                                        float(args["delta"]), float(args["delta0"]), float(args["epsilon"]))
            except ValueError as err:
                raise ConfigError(str(err), "domain") from None

    sspec = dict(data.get("solver", {}))
    sspec.setdefault("seed", seed)
    if seed_override is not None:
        sspec["seed"] = seed
    try:
        solver = SolverConfig.from_dict(sspec)
    except (ValueError, KeyError, TypeError) as err:
        raise ConfigError(str(err), "solver") from None

    pspec = dict(data.get("sampling", {}))
    pspec.setdefault("seed", seed)
    if seed_override is not None:
        pspec["seed"] = seed
    sampling = SamplingConfig.from_dict(pspec)

    return Scenario(name=str(data.get("name", "scenario")), manifold=manifold, omega=omega, V=V, W=W,
                    domain=domain, solver=solver, sampling=sampling, outputs=dict(data.get("outputs", {})),
                    geodesic=dict(data.get("geodesic", {})), seed=seed, raw=data)


def load_scenario(path, seed_override: int | None = None) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from None
    return parse_scenario(data, seed_override)
