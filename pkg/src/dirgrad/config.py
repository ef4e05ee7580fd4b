"""Experiment configuration: JSON parsing, validation and object construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .oracle import FiniteDifferenceOracle, NoiseModel, make_quadratic
from .prox_geometry import ProxSetup, bregman, norm

ALGORITHMS = ("ardd", "rdd", "arddsc", "rddsc")
RESTART = ("arddsc", "rddsc")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ProblemSpec:
    kind: str = "quadratic"
    n: int = 16
    spectrum: Any = None  # list, {"min", "max"} or None for all ones
    sigma_sq: float = 0.0
    mu: Optional[float] = None
    sparse: bool = False
    seed: int = 0
    ground_truth: bool = True

    def spectrum_array(self, n=None) -> Optional[np.ndarray]:
        n = self.n if n is None else n
        if self.spectrum is None:
            return None
        if isinstance(self.spectrum, dict):
            return np.linspace(self.spectrum["min"], self.spectrum["max"], n)
        return np.asarray(self.spectrum, dtype=float)


@dataclass
class OracleSpec:
    kind: str = "directional"
    delta_zeta: float = 0.0
    delta_eta: float = 0.0
    t: Optional[float] = None
    Delta: float = 0.0

    def build(self):
        if self.kind == "directional":
            return NoiseModel(self.delta_zeta, self.delta_eta)
        return FiniteDifferenceOracle(self.t, self.Delta)


@dataclass
class SweepSpec:
    axis: str
    values: list
    algorithms: list
    p: list
    epsilon: Optional[float] = None


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    oracle: OracleSpec
    p: int
    algorithm: str
    parameters: dict
    seeds: list
    output: str = "runs"
    x0: Optional[list] = None
    sweep: Optional[SweepSpec] = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def planned(self) -> bool:
        return "epsilon" in self.parameters

    def objective(self, n=None):
        n = self.problem.n if n is None else n
        rng = np.random.default_rng(self.problem.seed)
        return make_quadratic(
            n,
            spectrum=self.problem.spectrum_array(n),
            sigma=math.sqrt(self.problem.sigma_sq),
            mu=self.problem.mu,
            sparse_solution=self.problem.sparse,
            rng=rng,
        )

    def start(self, n=None) -> np.ndarray:
        n = self.problem.n if n is None else n
        if self.x0 is None:
            return np.zeros(n)
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (n,):
            raise ConfigError("x0", f"length {x0.size} does not match n={n}")
        return x0

    def setup(self, n=None) -> ProxSetup:
        return ProxSetup(self.p, self.problem.n if n is None else n)


def ground_truth_constants(obj, setup: ProxSetup, x0) -> dict:
    """Problem constants the planner and bounds need, from the known minimizer."""
    return dict(
        Theta_p=bregman(setup, x0, obj.x_star),
        R_p=norm(np.asarray(x0) - obj.x_star, setup.p),
        mu_p=obj.strong_convexity(setup.p),
    )


# ---------------------------------------------------------------------------
# parsing


def loads(text: str) -> dict:
    """Parse JSON, turning decode errors into line-anchored ``ConfigError``."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return data


def _num(d, key, path, default=None, *, positive=False, nonneg=False, integer=False, required=False):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "is required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    if integer and v != int(v):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}", f"must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{path}.{key}", f"must be nonnegative, got {v!r}")
    return int(v) if integer else float(v)


def _section(data, key):
    sec = data.get(key, {})
    if not isinstance(sec, dict):
        raise ConfigError(key, "must be an object")
    return sec


def _problem(d) -> ProblemSpec:
    kind = d.get("kind", "quadratic")
    if kind != "quadratic":
        raise ConfigError("problem.kind", f"unknown problem kind {kind!r} (supported: quadratic)")
    n = _num(d, "n", "problem", 16, integer=True)
    if n < 2:
        raise ConfigError("problem.n", f"must be >= 2, got {n}")
    spec = d.get("spectrum")
    if isinstance(spec, dict):
        lo = _num(spec, "min", "problem.spectrum", required=True, positive=True)
        hi = _num(spec, "max", "problem.spectrum", required=True, positive=True)
        if lo > hi:
            raise ConfigError("problem.spectrum", "min exceeds max")
        spec = {"min": lo, "max": hi}
    elif isinstance(spec, list):
        if len(spec) != n or not all(isinstance(v, (int, float)) and v > 0 for v in spec):
            raise ConfigError("problem.spectrum", f"expected {n} positive numbers")
    elif spec is not None:
        raise ConfigError("problem.spectrum", "expected a list, an object {min, max} or null")
    sigma_sq = _num(d, "sigma_sq", "problem", None, nonneg=True)
    if sigma_sq is None:
        sigma_sq = _num(d, "sigma", "problem", 0.0, nonneg=True) ** 2
    sparse = d.get("sparse", False)
    if not isinstance(sparse, bool):
        raise ConfigError("problem.sparse", "expected true or false")
    truth = d.get("ground_truth", True)
    if not isinstance(truth, bool):
        raise ConfigError("problem.ground_truth", "expected true or false")
    return ProblemSpec(
        kind, n, spec, sigma_sq,
        _num(d, "mu", "problem", None, positive=True),
        sparse,
        _num(d, "seed", "problem", 0, integer=True),
        truth,
    )


def _oracle(d) -> OracleSpec:
    kind = d.get("kind", "directional")
    if kind == "directional":
        return OracleSpec(
            kind,
            delta_zeta=_num(d, "delta_zeta", "oracle", 0.0, nonneg=True),
            delta_eta=_num(d, "delta_eta", "oracle", 0.0, nonneg=True),
        )
    if kind == "finite-difference":
        return OracleSpec(
            kind,
            t=_num(d, "t", "oracle", required=True, positive=True),
            Delta=_num(d, "Delta", "oracle", 0.0, nonneg=True),
        )
    raise ConfigError("oracle.kind", f"unknown oracle {kind!r} (directional or finite-difference)")


def _parameters(d, algorithm) -> dict:
    has_eps = "epsilon" in d
    explicit = [k for k in ("N", "m", "K") if k in d]
    if has_eps == bool(explicit):
        raise ConfigError(
            "parameters", "set exactly one of an explicit N/m/K or 'epsilon' (plan for a target accuracy)"
        )
    out = {}
    if has_eps:
        out["epsilon"] = _num(d, "epsilon", "parameters", positive=True)
    elif algorithm in RESTART:
        out["K"] = _num(d, "K", "parameters", required=True, integer=True, nonneg=True)
    else:
        out["N"] = _num(d, "N", "parameters", required=True, integer=True, positive=True)
        out["m"] = _num(d, "m", "parameters", 1, integer=True, positive=True)
    for key in ("R_p", "a", "Delta", "Theta_p"):
        if key in d:
            out[key] = _num(d, key, "parameters", positive=key != "Delta", nonneg=True)
    return out


def _seeds(v, path="seeds") -> list:
    if isinstance(v, int) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "seed list must be nonempty")
    if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in v):
        raise ConfigError(path, "seeds must be nonnegative integers")
    return list(v)


def parse_seed_list(text: str) -> list:
    """``"1,2,5-8"`` -> ``[1, 2, 5, 6, 7, 8]``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise ConfigError("--seed", f"cannot parse seed list {text!r}") from None
    return _seeds(out, "--seed")


def _sweep(d) -> SweepSpec:
    axis = d.get("axis")
    if axis not in ("N", "n"):
        raise ConfigError("sweep.axis", f"must be 'N' or 'n', got {axis!r}")
    values = d.get("values")
    if not isinstance(values, list) or not all(isinstance(v, int) and v > 0 for v in values):
        raise ConfigError("sweep.values", "expected a list of positive integers")
    if len(values) < 3:
        raise ConfigError("sweep.values", f"slope fitting needs at least 3 axis points, got {len(values)}")
    algs = d.get("algorithms", ["ardd"])
    bad = [a for a in algs if a not in ("ardd", "rdd")]
    if bad:
        raise ConfigError("sweep.algorithms", f"sweeps support ardd and rdd, got {bad}")
    ps = d.get("p", [2])
    if not all(p in (1, 2) for p in ps):
        raise ConfigError("sweep.p", "entries must be 1 or 2")
    return SweepSpec(axis, sorted(values), list(algs), list(ps), _num(d, "epsilon", "sweep", None, positive=True))


def from_dict(data: dict) -> ExperimentConfig:
    problem = _problem(_section(data, "problem"))
    oracle = _oracle(_section(data, "oracle"))
    p = _section(data, "geometry").get("p", 2)
    if p not in (1, 2):
        raise ConfigError("geometry.p", f"must be 1 or 2, got {p!r}")
    sweep = _sweep(_section(data, "sweep")) if "sweep" in data else None
    algorithm = data.get("algorithm", "ardd" if sweep else None)
    if algorithm not in ALGORITHMS:
        raise ConfigError("algorithm", f"unknown algorithm {algorithm!r} (one of {', '.join(ALGORITHMS)})")
    params = _section(data, "parameters")
    if sweep is not None and sweep.epsilon is not None:
        params = {}
    parameters = _parameters(params, algorithm) if params or sweep is None else {}
    output = data.get("output", "runs")
    if not isinstance(output, str):
        raise ConfigError("output", "expected a path string")
    x0 = data.get("x0")
    if x0 is not None and not isinstance(x0, list):
        raise ConfigError("x0", "expected a list of numbers")
    return ExperimentConfig(
        problem, oracle, p, algorithm, parameters, _seeds(data.get("seeds", [0])), output, x0, sweep, data
    )


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return from_dict(loads(fh.read()))
