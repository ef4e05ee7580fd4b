"""Test objectives, noisy directional-derivative oracles and gradient estimators.

Every estimator draws one direction ``e`` uniformly on the unit sphere and
``m`` independent samples ``xi_i``; the estimate is the batch-mean of the
noisy directional derivatives times ``e``. Randomness always comes from a
caller-supplied :class:`numpy.random.Generator`, drawn in a fixed order
(direction, samples, noise), so runs are reproducible from the seed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Union

import numpy as np

from .prox_geometry import DimensionError

# truncation level, in standard deviations, of the Gaussian noise draws
TRUNCATE = 6.0


class StochasticObjective(Protocol):
    """Contract for ``f(x) = E_xi F(x, xi)`` with smooth ``F(., xi)``.

    Batched: ``xi`` is an array whose leading axis indexes samples.
    """

    n: int
    L2: float
    sigma_sq: float
    mu: float
    f_star: Optional[float]
    x_star: Optional[np.ndarray]

    def sample_xi(self, rng: np.random.Generator, m: int = 1) -> np.ndarray: ...

    def value(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray: ...

    def dir_derivative(self, x: np.ndarray, xi: np.ndarray, e: np.ndarray) -> np.ndarray: ...

    def f(self, x: np.ndarray) -> float: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """``f(x) = 0.5 (x - x*)^T diag(spectrum) (x - x*) + f*``.

    Samples are additive gradient shifts: ``F(x, xi) = f(x) + <xi, x - x*>``,
    so ``g(x, xi) = grad f(x) + xi`` and every ``F(., xi)`` has the same
    Lipschitz gradient constant ``max(spectrum)``.
    """

    spectrum: np.ndarray
    x_star: np.ndarray
    f_star: float = 0.0
    sigma_sq: float = 0.0
    mu: float = 0.0

    @property
    def n(self) -> int:
        return self.spectrum.shape[0]

    @property
    def L2(self) -> float:
        return float(np.max(self.spectrum))

    def strong_convexity(self, p: int) -> float:
        """Modulus w.r.t. ``||.||_p``; for p=1 uses ``||h||_2^2 >= ||h||_1^2 / n``."""
        if p == 2:
            return self.mu
        return self.mu / self.n

    def sample_xi(self, rng, m=1):
        if self.sigma_sq == 0:
            return np.zeros((m, self.n))
        z = np.clip(rng.standard_normal((m, self.n)), -TRUNCATE, TRUNCATE)
        return z * math.sqrt(self.sigma_sq / self.n)

    def f(self, x):
        d = np.asarray(x, dtype=float) - self.x_star
        return 0.5 * float(d @ (self.spectrum * d)) + self.f_star

    def grad(self, x):
        return self.spectrum * (np.asarray(x, dtype=float) - self.x_star)

    def value(self, x, xi):
        d = np.asarray(x, dtype=float) - self.x_star
        return self.f(x) + xi @ d

    def stochastic_gradient(self, x, xi):
        return self.grad(x)[None, :] + xi

    def dir_derivative(self, x, xi, e):
        return float(self.grad(x) @ e) + xi @ e

    def curvature(self, e) -> float:
        """``e^T A e``; the exact finite-difference bias is ``t/2`` times this."""
        return float(e @ (self.spectrum * e))


def make_quadratic(
    n: int,
    spectrum=None,
    sigma: float = 0.0,
    mu: Optional[float] = None,
    sparse_solution: bool = False,
    rng: Optional[np.random.Generator] = None,
    *,
    x_star=None,
    f_star: float = 0.0,
    nnz: int = 4,
) -> QuadraticObjective:
    """Build a test quadratic.

    Parameters
    ----------
    n : int
        Dimension.
    spectrum : array_like, optional
        Eigenvalues of the Hessian, all in ``(0, L2]``; defaults to all ones.
    sigma : float
        Noise level: ``E||xi||_2^2 <= sigma**2``.
    mu : float, optional
        Declared Euclidean strong-convexity modulus; must not exceed
        ``min(spectrum)``. Defaults to ``min(spectrum)``.
    sparse_solution : bool
        Give ``x*`` only ``nnz`` nonzero entries of magnitude one.
    rng : numpy.random.Generator, optional
        Source for ``x*`` when it is not given explicitly.
    x_star : array_like, optional
        Explicit minimizer, overrides the random draw.
    """
    if n < 1:
        raise DimensionError("n must be positive")
    spec = np.ones(n) if spectrum is None else np.asarray(spectrum, dtype=float).copy()
    if spec.shape != (n,):
        raise DimensionError(f"spectrum has shape {spec.shape}, expected ({n},)")
    if np.any(spec <= 0):
        raise ValueError("spectrum entries must be positive")
    if mu is None:
        mu = float(np.min(spec))
    if mu < 0 or mu > np.min(spec) * (1 + 1e-12):
        raise ValueError(f"mu={mu} inconsistent with min eigenvalue {np.min(spec)}")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")

    if x_star is not None:
        xs = np.asarray(x_star, dtype=float).copy()
        if xs.shape != (n,):
            raise DimensionError(f"x_star has shape {xs.shape}, expected ({n},)")
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        if sparse_solution:
            xs = np.zeros(n)
            k = min(nnz, n)
            idx = rng.choice(n, size=k, replace=False)
            xs[idx] = rng.choice([-1.0, 1.0], size=k)
        else:
            xs = rng.standard_normal(n) / math.sqrt(n)
    for a in (spec, xs):
        a.flags.writeable = False
    return QuadraticObjective(
        spectrum=spec, x_star=xs, f_star=float(f_star), sigma_sq=float(sigma) ** 2, mu=float(mu)
    )


@dataclass(frozen=True)
class NoiseModel:
    """Additive oracle noise ``zeta + eta``.

    ``zeta`` is a truncated Gaussian with ``E zeta^2 <= delta_zeta``; ``eta`` is
    uniform on ``[-delta_eta, delta_eta]``.
    """

    delta_zeta: float = 0.0
    delta_eta: float = 0.0

    def __post_init__(self):
        if self.delta_zeta < 0 or self.delta_eta < 0:
            raise ValueError("noise levels must be nonnegative")

    def sample(self, rng, m=1) -> tuple[np.ndarray, np.ndarray]:
        if self.delta_zeta > 0:
            zeta = np.clip(rng.standard_normal(m), -TRUNCATE, TRUNCATE) * math.sqrt(self.delta_zeta)
        else:
            zeta = np.zeros(m)
        if self.delta_eta > 0:
            eta = np.clip(rng.uniform(-self.delta_eta, self.delta_eta, m), -self.delta_eta, self.delta_eta)
        else:
            eta = np.zeros(m)
        return zeta, eta


@dataclass(frozen=True)
class FiniteDifferenceOracle:
    """Derivative-free oracle: forward differences of noisy function values.

    Values carry additive noise uniform on ``[-value_noise, value_noise]``,
    drawn independently at ``x`` and ``x + t e``.
    """

    t: float
    value_noise: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"smoothing parameter t must be positive, got {self.t!r}")
        if self.value_noise < 0:
            raise ValueError("value_noise must be nonnegative")


@dataclass
class GradientEstimate:
    """Rank-one estimate ``derivative * direction``."""

    vector: np.ndarray
    direction: np.ndarray
    batch_size: int
    oracle_calls: int
    derivative: float = 0.0
    # per-sample noise actually injected, for audits
    zeta: Optional[np.ndarray] = field(default=None, repr=False)
    eta: Optional[np.ndarray] = field(default=None, repr=False)


def sample_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform draw from the unit Euclidean sphere in ``R^n``."""
    if n < 1:
        raise DimensionError("n must be positive")
    while True:
        v = rng.standard_normal(n)
        nrm = np.linalg.norm(v)
        if nrm > 0:
            return v / nrm


def _check_x(obj, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (obj.n,):
        raise DimensionError(f"x has shape {x.shape}, expected ({obj.n},)")
    return x


def noisy_dir_derivative(obj, noise: NoiseModel, x, xi, e, rng, *, return_parts=False):
    """One noisy directional-derivative query ``<g(x, xi), e> + zeta + eta``."""
    x = _check_x(obj, x)
    e = np.asarray(e, dtype=float)
    if e.shape != (obj.n,):
        raise DimensionError(f"e has shape {e.shape}, expected ({obj.n},)")
    xi = np.asarray(xi, dtype=float).reshape(1, -1)
    exact = float(obj.dir_derivative(x, xi, e)[0])
    zeta, eta = noise.sample(rng, 1)
    val = exact + float(zeta[0]) + float(eta[0])
    if return_parts:
        return val, float(zeta[0]), float(eta[0])
    return val


def estimate_gradient(obj, noise: NoiseModel, x, m: int, rng) -> GradientEstimate:
    """Mini-batch estimate from ``m`` noisy queries along one random direction."""
    if m < 1:
        raise ValueError(f"batch size must be >= 1, got {m!r}")
    x = _check_x(obj, x)
    e = sample_direction(rng, obj.n)
    xi = obj.sample_xi(rng, m)
    zeta, eta = noise.sample(rng, m)
    derivs = obj.dir_derivative(x, xi, e) + zeta + eta
    d = float(np.mean(derivs))
    return GradientEstimate(d * e, e, m, m, d, zeta, eta)


def finite_difference_estimate(obj, x, m: int, t: float, value_noise_bound: float, rng) -> GradientEstimate:
    """Forward-difference estimate from ``m`` pairs of noisy function values.

    The recorded ``zeta`` is the difference-quotient bias
    ``(F(x+te) - F(x)) / t - <g(x, xi), e>`` and ``eta`` the value-noise part.
    """
    if not t > 0:
        raise ValueError(f"smoothing parameter t must be positive, got {t!r}")
    if m < 1:
        raise ValueError(f"batch size must be >= 1, got {m!r}")
    if value_noise_bound < 0:
        raise ValueError("value noise bound must be nonnegative")
    x = _check_x(obj, x)
    e = sample_direction(rng, obj.n)
    xi = obj.sample_xi(rng, m)
    if value_noise_bound > 0:
        noise_x = rng.uniform(-value_noise_bound, value_noise_bound, m)
        noise_xt = rng.uniform(-value_noise_bound, value_noise_bound, m)
    else:
        noise_x = noise_xt = np.zeros(m)
    fx = obj.value(x, xi)
    fxt = obj.value(x + t * e, xi)
    quotients = ((fxt + noise_xt) - (fx + noise_x)) / t
    d = float(np.mean(quotients))
    zeta = (fxt - fx) / t - obj.dir_derivative(x, xi, e)
    eta = (noise_xt - noise_x) / t
    return GradientEstimate(d * e, e, m, m, d, zeta, eta)


def implied_noise_levels(t: float, L2: float, Delta: float) -> tuple[float, float]:
    """Oracle noise levels induced by forward differences with step ``t``."""
    if not t > 0:
        raise ValueError(f"smoothing parameter t must be positive, got {t!r}")
    if Delta < 0:
        raise ValueError("Delta must be nonnegative")
    return L2 * L2 * t * t / 4.0, 2.0 * Delta / t


Oracle = Union[NoiseModel, FiniteDifferenceOracle]
Estimator = Callable[[np.ndarray, int, np.random.Generator], GradientEstimate]


def make_estimator(obj, oracle: Oracle) -> Estimator:
    """Bind an objective and an oracle model into ``estimator(x, m, rng)``."""
    if isinstance(oracle, FiniteDifferenceOracle):
        return lambda x, m, rng: finite_difference_estimate(obj, x, m, oracle.t, oracle.value_noise, rng)
    return lambda x, m, rng: estimate_gradient(obj, oracle, x, m, rng)


def noise_levels(obj, oracle: Oracle) -> tuple[float, float]:
    """``(delta_zeta, delta_eta)`` that the oracle is guaranteed to respect."""
    if isinstance(oracle, FiniteDifferenceOracle):
        return implied_noise_levels(oracle.t, obj.L2, oracle.value_noise)
    return oracle.delta_zeta, oracle.delta_eta
