"""Accelerated and non-accelerated random directional-derivative methods.

``run_ardd`` couples a Euclidean gradient step (always 2-norm) with a mirror
step in the configured geometry. ``run_rdd`` takes mirror steps only and
returns the average of its iterates. The ``*sc`` variants wrap either solver
in a restart loop for strongly convex objectives, recentering and shrinking
the prox function each outer step.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .oracle import GradientEstimate, Oracle, make_estimator, noise_levels
from .prox_geometry import (
    DimensionError,
    Geometry,
    ProxSetup,
    ShiftedProx,
    mirror_step,
    omega_constant,
    rho_constant,
)

log = logging.getLogger(__name__)

# iterations below this are all recorded; above it checkpoints grow geometrically
DENSE_CHECKPOINTS = 10_000
CHECKPOINT_GROWTH = 1.05


@dataclass
class TraceRow:
    k: int
    oracle_calls: int
    f_gap: Optional[float]
    elapsed_ns: int


@dataclass
class RunRecord:
    """Per-checkpoint trace of one run plus its output and parameter echo."""

    rows: list = field(default_factory=list)
    output: Optional[np.ndarray] = None
    seed: Optional[int] = None
    params: dict = field(default_factory=dict)

    @property
    def oracle_calls(self) -> int:
        return self.rows[-1].oracle_calls if self.rows else 0

    def gaps(self) -> np.ndarray:
        return np.array([r.f_gap for r in self.rows], dtype=float)

    def ks(self) -> np.ndarray:
        return np.array([r.k for r in self.rows], dtype=int)


class _Checkpoints:
    def __init__(self, total, extra=()):
        self.total = total
        self.extra = frozenset(extra)
        self.next_sparse = DENSE_CHECKPOINTS

    def __call__(self, k):
        if k <= DENSE_CHECKPOINTS or k == self.total or k in self.extra:
            return True
        if k >= self.next_sparse:
            self.next_sparse = max(k + 1, math.ceil(self.next_sparse * CHECKPOINT_GROWTH))
            return True
        return False


def _gap(obj, point) -> Optional[float]:
    if getattr(obj, "f_star", None) is None:
        return None
    return obj.f(point) - obj.f_star


def _base(setup: Geometry) -> ProxSetup:
    return setup.base if isinstance(setup, ShiftedProx) else setup


def _validate(obj, setup, x0, N, m):
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N!r}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m!r}")
    if not obj.L2 > 0:
        raise ValueError("objective must expose L2 > 0")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (setup.n,) or setup.n != obj.n:
        raise DimensionError(f"x0 shape {x0.shape}, setup n={setup.n}, objective n={obj.n}")
    return x0


def ardd_step_sizes(k: int, n: int, rho: float, L2: float) -> tuple[float, float]:
    """``(alpha_{k+1}, tau_k)`` for iteration ``k``."""
    return (k + 2) / (96 * n * n * rho * L2), 2 / (k + 2)


def rdd_step_size(n: int, rho: float, L2: float) -> float:
    return 1 / (48 * n * rho * L2)


@dataclass
class ArddState:
    k: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    y_prev: np.ndarray
    z_prev: np.ndarray
    alpha_next: float
    tau: float
    estimate: Optional[GradientEstimate]
    oracle_calls: int


def ardd_iterates(obj, oracle: Oracle, setup: Geometry, x0, N, m, rng, *, rho=None) -> Iterator[ArddState]:
    """Yield the state after each of the ``N`` accelerated iterations.

    ``state.k`` is the 1-based iteration count, ``x`` the extrapolation point,
    ``y``/``z`` the updated iterates and ``y_prev``/``z_prev`` the ones they
    replaced.
    """
    x0 = _validate(obj, setup, x0, N, m)
    n = setup.n
    rho = rho_constant(n, setup.q) if rho is None else rho
    L2 = obj.L2
    estimator = make_estimator(obj, oracle)
    y = x0.copy()
    z = x0.copy()
    calls = 0
    for k in range(N):
        alpha, tau = ardd_step_sizes(k, n, rho, L2)
        x = tau * z + (1 - tau) * y
        est = estimator(x, m, rng)
        calls += est.oracle_calls
        y_next = x - est.vector / (2 * L2)
        z_next = mirror_step(setup, z, est.vector, alpha * n)
        yield ArddState(k + 1, x, y_next, z_next, y, z, alpha, tau, est, calls)
        y, z = y_next, z_next


def run_ardd(obj, oracle: Oracle, setup: Geometry, x0, N: int, m: int, rng, *, rho=None, seed=None, record=True, checkpoints=()):
    """Accelerated method; returns ``(y_N, RunRecord)``."""
    base = _base(setup)
    rec = RunRecord(seed=seed, params=dict(algorithm="ardd", N=N, m=m, p=base.p, n=base.n))
    keep = _Checkpoints(N, checkpoints)
    t0 = time.perf_counter_ns()
    x0 = _validate(obj, setup, x0, N, m)
    if record:
        rec.rows.append(TraceRow(0, 0, _gap(obj, x0), 0))
    y = x0
    for st in ardd_iterates(obj, oracle, setup, x0, N, m, rng, rho=rho):
        y = st.y
        if record and keep(st.k):
            rec.rows.append(TraceRow(st.k, st.oracle_calls, _gap(obj, y), time.perf_counter_ns() - t0))
    rec.output = y
    rec.params["oracle_calls"] = N * m
    return y, rec


@dataclass
class RddState:
    k: int
    x: np.ndarray
    running_sum: np.ndarray
    alpha: float
    estimate: Optional[GradientEstimate]
    oracle_calls: int

    @property
    def average(self) -> np.ndarray:
        """Average of the iterates ``x_0, ..., x_{k-1}``."""
        return self.running_sum / self.k


def rdd_iterates(obj, oracle: Oracle, setup: Geometry, x0, N, m, rng, *, rho=None) -> Iterator[RddState]:
    """Yield the state after each of the ``N`` non-accelerated iterations."""
    x0 = _validate(obj, setup, x0, N, m)
    n = setup.n
    rho = rho_constant(n, setup.q) if rho is None else rho
    alpha = rdd_step_size(n, rho, obj.L2)
    estimator = make_estimator(obj, oracle)
    x = x0.copy()
    total = np.zeros_like(x0)
    calls = 0
    for k in range(N):
        total = total + x
        est = estimator(x, m, rng)
        calls += est.oracle_calls
        x = mirror_step(setup, x, est.vector, alpha * n)
        yield RddState(k + 1, x, total, alpha, est, calls)


def run_rdd(obj, oracle: Oracle, setup: Geometry, x0, N: int, m: int, rng, *, rho=None, seed=None, record=True, checkpoints=()):
    """Non-accelerated method; returns ``(x_bar_N, RunRecord)``."""
    base = _base(setup)
    rec = RunRecord(seed=seed, params=dict(algorithm="rdd", N=N, m=m, p=base.p, n=base.n))
    keep = _Checkpoints(N, checkpoints)
    t0 = time.perf_counter_ns()
    x0 = _validate(obj, setup, x0, N, m)
    if record:
        rec.rows.append(TraceRow(0, 0, _gap(obj, x0), 0))
    avg = x0
    for st in rdd_iterates(obj, oracle, setup, x0, N, m, rng, rho=rho):
        if record and keep(st.k):
            avg = st.average
            rec.rows.append(TraceRow(st.k, st.oracle_calls, _gap(obj, avg), time.perf_counter_ns() - t0))
        elif st.k == N:
            avg = st.average
    rec.output = avg
    rec.params["oracle_calls"] = N * m
    return avg, rec


def theoretical_delta(variant, N0, n, rho_n, L2, R_p, Omega_p, delta_zeta, delta_eta) -> float:
    """Additive error floor of the restart schemes.

    ``variant`` is ``"accelerated"`` (ARDD inner solver) or
    ``"nonaccelerated"`` (RDD inner solver).
    """
    s = math.sqrt(delta_zeta) / 2 + 2 * delta_eta
    radius_term = math.sqrt(2 * n * R_p * R_p * Omega_p)
    if variant == "accelerated":
        return (
            61 * N0 / (24 * L2) * delta_zeta
            + 122 * N0 / (3 * L2) * delta_eta**2
            + 12 * radius_term / N0**2 * s
            + N0**2 / (12 * n * rho_n * L2) * s**2
        )
    if variant == "nonaccelerated":
        return (
            n / (12 * L2) * delta_zeta
            + 4 * n / (3 * L2) * delta_eta**2
            + 8 * radius_term / N0 * s
            + N0 / (3 * L2 * rho_n) * s**2
        )
    raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class RestartConstants:
    """Inner length and batch-schedule constants of a restart scheme."""

    a: float
    b: float
    N0: int

    def batch_size(self, k, sigma_sq, L2, mu, R_p, accelerated) -> int:
        num = 8 * self.b * sigma_sq * 2**k
        if accelerated:
            num *= self.N0
        return max(1, math.ceil(num / (L2 * mu * R_p * R_p)))


def restart_constants(accelerated: bool, n, rho, L2, Omega, mu, *, a=None) -> RestartConstants:
    """``N0`` from the given (or default) ``a``.

    Defaults: ``a = 384 n^2 rho``, ``b = 4/n`` and ``N0 = ceil(sqrt(8 a L2 Omega / mu))``
    for the accelerated scheme; ``a = 384 n rho``, ``b = 2`` and
    ``N0 = ceil(8 a L2 Omega / mu)`` otherwise.
    """
    if not mu > 0:
        raise ValueError(f"strong convexity modulus must be positive, got {mu!r}")
    if accelerated:
        a = 384 * n * n * rho if a is None else a
        return RestartConstants(a, 4 / n, math.ceil(math.sqrt(8 * a * L2 * Omega / mu)))
    a = 384 * n * rho if a is None else a
    return RestartConstants(a, 2.0, math.ceil(8 * a * L2 * Omega / mu))


@dataclass
class RestartState:
    u: np.ndarray
    k: int
    R_sq: float
    N0: int
    m_k: int
    Delta: float
    oracle_calls: int


def restart_radius_sq(k, R_p, Delta, mu) -> float:
    h = 2.0**-k
    return R_p * R_p * h + 4 * Delta / mu * (1 - h)


def restart_iterates(obj, oracle, setup: ProxSetup, x0, R_p, K, rng, *, accelerated, mu=None, a=None, rho=None, delta=None):
    """Yield ``RestartState`` after each outer step (``k`` counts finished steps)."""
    if isinstance(setup, ShiftedProx):
        raise TypeError("restart schemes take a base ProxSetup")
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K!r}")
    if not R_p > 0:
        raise ValueError(f"R_p must be positive, got {R_p!r}")
    mu = obj.strong_convexity(setup.p) if mu is None else mu
    if not mu > 0:
        raise ValueError(f"strong convexity modulus must be positive, got {mu!r}")
    n = setup.n
    rho = rho_constant(n, setup.q) if rho is None else rho
    omega = omega_constant(setup)
    L2 = obj.L2
    consts = restart_constants(accelerated, n, rho, L2, omega, mu, a=a)
    N0 = consts.N0
    if delta is None:
        dz, de = noise_levels(obj, oracle)
        variant = "accelerated" if accelerated else "nonaccelerated"
        delta = theoretical_delta(variant, N0, n, rho, L2, R_p, omega, dz, de)
    inner = run_ardd if accelerated else run_rdd
    u = np.asarray(x0, dtype=float).copy()
    calls = 0
    for k in range(K):
        m_k = consts.batch_size(k, obj.sigma_sq, L2, mu, R_p, accelerated)
        R_sq = restart_radius_sq(k, R_p, delta, mu)
        prox = ShiftedProx(setup, u, math.sqrt(R_sq))
        u, _ = inner(obj, oracle, prox, u, N0, m_k, rng, rho=rho, record=False)
        calls += N0 * m_k
        yield RestartState(u, k + 1, R_sq, N0, m_k, delta, calls)


def _run_restart(name, obj, oracle, setup, x0, R_p, K, rng, accelerated, mu, a, rho, delta, seed):
    mu_eff = obj.strong_convexity(setup.p) if mu is None else mu
    rec = RunRecord(seed=seed, params=dict(algorithm=name, K=K, R_p=R_p, p=setup.p, n=setup.n, mu=mu_eff))
    x0 = np.asarray(x0, dtype=float)
    rec.rows.append(TraceRow(0, 0, _gap(obj, x0), 0))
    t0 = time.perf_counter_ns()
    u = x0.copy()
    schedule, radii = [], []
    for st in restart_iterates(obj, oracle, setup, x0, R_p, K, rng, accelerated=accelerated, mu=mu, a=a, rho=rho, delta=delta):
        u = st.u
        schedule.append(st.m_k)
        radii.append(st.R_sq)
        rec.params.update(N0=st.N0, Delta=st.Delta)
        rec.rows.append(TraceRow(st.k, st.oracle_calls, _gap(obj, u), time.perf_counter_ns() - t0))
    rec.params.update(m_schedule=schedule, R_sq=radii, oracle_calls=rec.oracle_calls)
    rec.output = u
    return u, rec


def run_arddsc(obj, oracle, setup: ProxSetup, x0, R_p, K, rng, *, mu=None, a=None, rho=None, delta=None, seed=None):
    """Restarted accelerated method; returns ``(u_K, RunRecord)``.

    ``a`` overrides the inner-length constant (default ``384 n^2 rho``) and
    ``delta`` the additive error floor (default: computed from the oracle's
    noise levels).
    """
    return _run_restart("arddsc", obj, oracle, setup, x0, R_p, K, rng, True, mu, a, rho, delta, seed)


def run_rddsc(obj, oracle, setup: ProxSetup, x0, R_p, K, rng, *, mu=None, a=None, rho=None, delta=None, seed=None):
    """Restarted non-accelerated method; inner output is the iterate average."""
    return _run_restart("rddsc", obj, oracle, setup, x0, R_p, K, rng, False, mu, a, rho, delta, seed)
