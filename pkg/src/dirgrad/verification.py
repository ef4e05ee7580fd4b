"""Independent oracles and Monte-Carlo checks for the closed-form machinery.

Nothing here imports the geometry helpers it is meant to check: the prox
function used by :func:`brute_force_mirror_step` is re-derived from its
definition and minimized by plain gradient descent.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

MIN_SAMPLES = 10_000


class ConvergenceError(RuntimeError):
    """The brute-force minimizer hit its iteration cap."""


@dataclass
class MonteCarloReport:
    """Outcome of one statistical (or worst-case) check."""

    name: str
    samples: int
    mean: float
    std_error: float
    bound: float
    passed: bool
    kind: str = "upper"  # "upper", "equal" or "max"
    detail: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"[{verdict}] {self.name}: mean={self.mean:.6g} se={self.std_error:.3g} "
            f"{'target' if self.kind == 'equal' else 'bound'}={self.bound:.6g} samples={self.samples}"
        )


# slack for comparisons that hold with equality in exact arithmetic
_ROUND = 1e-12


def upper_report(name, values, bound, z=3.0, detail=None) -> MonteCarloReport:
    """One-sided test: pass when ``mean + z * SE <= bound``."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    ok = mean + z * se <= bound * (1 + _ROUND) + _ROUND * abs(mean)
    return MonteCarloReport(name, n, mean, se, float(bound), bool(ok), "upper", detail)


def equality_report(name, values, target, z=3.0, detail=None) -> MonteCarloReport:
    """Two-sided test: pass when ``|mean - target| <= z * SE``."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    ok = abs(mean - target) <= z * se + _ROUND * max(abs(target), abs(mean))
    return MonteCarloReport(name, n, mean, se, float(target), bool(ok), "equal", detail)


# ---------------------------------------------------------------------------
# brute-force mirror step


def _prox_parts(p, n):
    """Value and gradient of the prox function, straight from the definition."""
    if p == 2:
        return (lambda v: 0.5 * float(np.dot(v, v))), (lambda v: np.array(v, dtype=float))
    ln_n = math.log(n)
    k = 1 + 1 / ln_n
    c = math.e * n ** ((k - 1) * (2 - k) / k) * ln_n

    def value(v):
        s = float(np.sum(np.abs(v) ** k))
        return 0.5 * c * s ** (2 / k)

    def grad(v):
        a = np.abs(v)
        s = float(np.sum(a**k))
        if s == 0.0:
            return np.zeros_like(v)
        # d/dv_i (c/2) s^(2/k) = c s^(2/k - 1) |v_i|^(k-1) sign(v_i)
        return c * s ** (2 / k - 1) * a ** (k - 1) * np.sign(v)

    return value, grad


def _unpack(setup):
    base = getattr(setup, "base", setup)
    if hasattr(setup, "center"):
        return base.p, base.n, np.asarray(setup.center, dtype=float), float(setup.radius)
    return base.p, base.n, None, None


def brute_force_mirror_step(setup, z, g, step, tol=1e-9, max_iter=100_000) -> np.ndarray:
    """Minimize ``step * <g, v - z> + V[z](v)`` by gradient descent.

    Barzilai-Borwein trial steps with backtracking, stopped once the
    gradient norm is below ``tol``. The objective is 1-strongly convex, so the
    returned point is within ``tol`` of the minimizer in the 2-norm.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    p, n, center, radius = _unpack(setup)
    value, grad = _prox_parts(p, n)
    if center is not None:
        base_value, base_grad = value, grad
        value = lambda v: radius**2 * base_value((v - center) / radius)  # noqa: E731
        grad = lambda v: radius * base_grad((v - center) / radius)  # noqa: E731
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    gz = grad(z)
    dz = value(z)

    def phi(v):
        return step * float(g @ (v - z)) + value(v) - dz - float(gz @ (v - z))

    def dphi(v):
        return step * g + grad(v) - gz

    v = z.copy()
    dv = dphi(v)
    h = 1.0
    for _ in range(max_iter):
        if np.linalg.norm(dv) <= tol:
            return v
        fv = phi(v)
        gnorm = np.linalg.norm(dv)
        while True:
            cand = v - h * dv
            dcand = dphi(cand)
            # near the optimum phi differences drown in rounding; then accept
            # any step that shrinks the gradient
            if phi(cand) <= fv - 0.5 * h * float(dv @ dv) or np.linalg.norm(dcand) < gnorm:
                break
            if h < 1e-300:
                raise ConvergenceError("line search failed")
            h *= 0.5
        s, y = cand - v, dcand - dv
        sy = float(s @ y)
        h = float(s @ s) / sy if sy > 0 else 2 * h
        v, dv = cand, dcand
    raise ConvergenceError(f"no convergence in {max_iter} iterations (|grad|={np.linalg.norm(dv):.3g})")


# ---------------------------------------------------------------------------
# sphere-direction moments


def _rho(n, q):
    log_term = 16 * math.log(n) - 8
    if q == math.inf:
        return log_term / n
    return min(q - 1, log_term) * n ** (2 / q - 1)


def _sphere(rng, samples, n):
    v = rng.standard_normal((samples, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


_warned: set = set()


def check_lemma1(n, q, samples, rng, s=None) -> tuple[MonteCarloReport, MonteCarloReport]:
    """Sphere moments ``E||e||_q^2 <= rho_n`` and
    ``E[<s,e>^2 ||e||_q^2] <= (6 rho_n / n) ||s||_2^2``."""
    if n < 8 and n not in _warned:
        _warned.add(n)
        log.warning("n < 8: rho_n hypothesis n >= 8 violated (n=%d), constant not certified", n)
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    rho = _rho(n, q)
    e = _sphere(rng, samples, n)
    s = rng.standard_normal(n) if s is None else np.asarray(s, dtype=float)
    qn = np.max(np.abs(e), axis=1) ** 2 if q == math.inf else np.sum(e * e, axis=1)
    qlabel = "inf" if q == math.inf else f"{q:g}"
    r1 = upper_report(f"E|e|_{qlabel}^2 (n={n})", qn, rho)
    r2 = upper_report(
        f"E<s,e>^2|e|_{qlabel}^2 (n={n})", (e @ s) ** 2 * qn, 6 * rho / n * float(s @ s)
    )
    return r1, r2


def check_estimator_identity(obj, x, samples, rng) -> tuple[MonteCarloReport, MonteCarloReport]:
    """Direction identities behind the rank-one estimator, at zero noise.

    Reports ``E<s,e>^2 = ||s||^2 / n`` for ``s = grad f(x)`` (two-sided) and
    ``||n * mean(estimate) - grad f(x)||_2 <= 4 SE``.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {samples}")
    from .oracle import NoiseModel, estimate_gradient

    x = np.asarray(x, dtype=float)
    n = obj.n
    grad = obj.grad(x)
    noise = NoiseModel()
    est = np.empty((samples, n))
    dirs = np.empty((samples, n))
    for i in range(samples):
        ge = estimate_gradient(obj, noise, x, 1, rng)
        est[i] = ge.vector
        dirs[i] = ge.direction
    r1 = equality_report(f"E<s,e>^2 = |s|^2/n (n={n})", (dirs @ grad) ** 2, float(grad @ grad) / n)
    scaled = n * est
    err = float(np.linalg.norm(scaled.mean(axis=0) - grad))
    # SE of a vector mean: sqrt(trace(Cov) / samples)
    se = math.sqrt(float(np.sum(np.var(scaled, axis=0, ddof=1))) / samples)
    r2 = MonteCarloReport(
        f"|n mean(est) - grad| (n={n})", samples, err, se, 4 * se,
        err <= 4 * se + _ROUND, "max",
    )
    return r1, r2


def check_fd_noise_bounds(obj, t, Delta, samples, rng) -> list[MonteCarloReport]:
    """Per-call audit of the finite-difference oracle on a quadratic.

    The bias must equal ``(t/2) e^T A e`` up to rounding and never exceed
    ``L t / 2``; the value-noise part must never exceed ``2 Delta / t``.
    """
    from .oracle import finite_difference_estimate

    x = obj.x_star + rng.standard_normal(obj.n)
    worst_bias_err = 0.0
    max_zeta = 0.0
    max_eta = 0.0
    bias_violations = 0
    zeta_violations = 0
    eta_violations = 0
    eta_bound = 2 * Delta / t
    zeta_bound = obj.L2 * t / 2
    eps = np.finfo(float).eps
    for _ in range(samples):
        ge = finite_difference_estimate(obj, x, 1, t, Delta, rng)
        zeta, eta = float(ge.zeta[0]), float(ge.eta[0])
        exact = t / 2 * obj.curvature(ge.direction)
        # rounding of the difference quotient: a few ulps of |F| over t
        xi = np.zeros((1, obj.n))
        scale = abs(obj.value(x, xi)[0]) + abs(obj.value(x + t * ge.direction, xi)[0]) + 1.0
        tol = 64 * eps * scale / t
        err = abs(zeta - exact)
        worst_bias_err = max(worst_bias_err, err / tol)
        bias_violations += err > tol
        zeta_violations += abs(zeta) > zeta_bound + tol
        eta_violations += abs(eta) > eta_bound * (1 + 1e-12)
        max_zeta = max(max_zeta, abs(zeta))
        max_eta = max(max_eta, abs(eta))
    return [
        MonteCarloReport(
            "fd bias == (t/2) e'Ae", samples, worst_bias_err, 0.0, 1.0, bias_violations == 0, "max",
            f"worst error in rounding units; violations={bias_violations}",
        ),
        MonteCarloReport(
            "fd |zeta| <= L t / 2", samples, max_zeta, 0.0, zeta_bound, zeta_violations == 0, "max",
            f"violations={zeta_violations}",
        ),
        MonteCarloReport(
            "fd |eta| <= 2 Delta / t", samples, max_eta, 0.0, eta_bound, eta_violations == 0, "max",
            f"violations={eta_violations}",
        ),
    ]
