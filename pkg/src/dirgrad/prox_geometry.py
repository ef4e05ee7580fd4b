"""Proximal setups for the 1-norm and 2-norm geometries.

The 2-norm setup uses ``d(x) = 0.5 * ||x||_2^2``. The 1-norm setup uses the
scaled squared kappa-norm

    d(x) = (c / 2) * ||x||_kappa^2,   kappa = 1 + 1 / ln(n),

with ``c = e * n^((kappa - 1)(2 - kappa) / kappa) * ln(n)``, which makes ``d``
1-strongly convex with respect to ``||.||_1``. Mirror steps for this setup are
computed in closed form through the conjugate map.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

log = logging.getLogger(__name__)


class DimensionError(ValueError):
    """Raised when vector lengths do not match the geometry."""


@dataclass(frozen=True)
class ProxSetup:
    """Geometry of a run: norm index ``p`` in {1, 2} and dimension ``n``."""

    p: int
    n: int

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p!r}")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n!r}")

    @property
    def q(self) -> float:
        return math.inf if self.p == 1 else 2.0

    @property
    def kappa(self) -> float:
        if self.p == 2:
            return 2.0
        return 1.0 + 1.0 / math.log(self.n)

    @property
    def coeff(self) -> float:
        if self.p == 2:
            return 1.0
        k = self.kappa
        ln_n = math.log(self.n)
        return math.e * self.n ** ((k - 1.0) * (2.0 - k) / k) * ln_n

    @property
    def base(self) -> "ProxSetup":
        return self


@dataclass(frozen=True, eq=False)
class ShiftedProx:
    """Recentered, rescaled prox function ``R^2 * d((x - center) / R)``."""

    base: ProxSetup
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        if center.shape != (self.base.n,):
            raise DimensionError(
                f"center has shape {center.shape}, expected ({self.base.n},)"
            )
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius!r}")
        center = center.copy()
        center.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def q(self) -> float:
        return self.base.q

    @property
    def n(self) -> int:
        return self.base.n


Geometry = Union[ProxSetup, ShiftedProx]


def _check(setup: Geometry, *vectors) -> list[np.ndarray]:
    out = []
    for v in vectors:
        a = np.asarray(v, dtype=float)
        if a.shape != (setup.n,):
            raise DimensionError(f"expected a vector of length {setup.n}, got shape {a.shape}")
        out.append(a)
    return out


def norm(x, p) -> float:
    """Return ``||x||_p`` for ``p`` in {1, 2, inf}."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DimensionError("norm needs a non-empty vector")
    if p == 1:
        return float(np.sum(np.abs(x)))
    if p == 2:
        return float(np.linalg.norm(x))
    if p == math.inf:
        return float(np.max(np.abs(x)))
    raise ValueError(f"unsupported norm index {p!r}")


def _kappa_norm(x: np.ndarray, k: float) -> float:
    # scale by the max entry so |x_i|^k cannot overflow for large k
    top = np.max(np.abs(x))
    if top == 0.0:
        return 0.0
    r = np.abs(x) / top
    return float(top * np.sum(r**k) ** (1.0 / k))


def _power_map(x: np.ndarray, k: float) -> np.ndarray:
    """Gradient of ``0.5 * ||x||_k^2``: ``||x||_k^(2-k) |x_i|^(k-1) sign(x_i)``.

    Written as ``||x||_k * (|x_i| / ||x||_k)^(k-1) * sign(x_i)`` and evaluated
    through ``exp((k - 1) * log(ratio))``; zero entries map to zero.
    """
    nrm = _kappa_norm(x, k)
    out = np.zeros_like(x)
    if nrm == 0.0:
        return out
    nz = x != 0.0
    ratio = np.abs(x[nz]) / nrm
    # ratios can underflow to 0 for tiny entries; log(0) = -inf maps them to 0
    with np.errstate(divide="ignore"):
        out[nz] = nrm * np.exp((k - 1.0) * np.log(ratio)) * np.sign(x[nz])
    return out


def _base_value(setup: ProxSetup, x: np.ndarray) -> float:
    if setup.p == 2:
        return 0.5 * float(x @ x)
    return 0.5 * setup.coeff * _kappa_norm(x, setup.kappa) ** 2


def _base_grad(setup: ProxSetup, x: np.ndarray) -> np.ndarray:
    if setup.p == 2:
        return x.copy()
    return setup.coeff * _power_map(x, setup.kappa)


def _base_grad_conjugate(setup: ProxSetup, y: np.ndarray) -> np.ndarray:
    # conjugate of (c/2)||.||_k^2 is (1/(2c))||.||_k'^2 with 1/k + 1/k' = 1
    if setup.p == 2:
        return y.copy()
    k = setup.kappa
    return _power_map(y, k / (k - 1.0)) / setup.coeff


def prox_value(setup: Geometry, x) -> float:
    """Evaluate the prox function ``d(x)`` (or its shifted form)."""
    (x,) = _check(setup, x)
    if isinstance(setup, ShiftedProx):
        r = setup.radius
        return r * r * _base_value(setup.base, (x - setup.center) / r)
    return _base_value(setup, x)


def prox_gradient(setup: Geometry, x) -> np.ndarray:
    """Mirror map ``grad d(x)``, with ``grad d(0) = 0`` in the 1-norm case."""
    (x,) = _check(setup, x)
    if isinstance(setup, ShiftedProx):
        r = setup.radius
        return r * _base_grad(setup.base, (x - setup.center) / r)
    return _base_grad(setup, x)


def conjugate_gradient(setup: Geometry, y) -> np.ndarray:
    """Inverse mirror map ``grad d*(y)``."""
    (y,) = _check(setup, y)
    if isinstance(setup, ShiftedProx):
        r = setup.radius
        return setup.center + r * _base_grad_conjugate(setup.base, y / r)
    return _base_grad_conjugate(setup, y)


def bregman(setup: Geometry, z, x) -> float:
    """Bregman divergence ``V[z](x) = d(x) - d(z) - <grad d(z), x - z>``."""
    z, x = _check(setup, z, x)
    if setup.p == 2:
        # shift and rescale cancel for the Euclidean setup
        diff = x - z
        return 0.5 * float(diff @ diff)
    val = prox_value(setup, x) - prox_value(setup, z) - float(prox_gradient(setup, z) @ (x - z))
    return max(val, 0.0)


def mirror_step(setup: Geometry, z, g, step: float) -> np.ndarray:
    """Return ``argmin_v { step * <g, v - z> + V[z](v) }`` over all of R^n.

    Solved through the mirror map: ``grad d(v) = grad d(z) - step * g``.
    """
    z, g = _check(setup, z, g)
    if step < 0:
        raise ValueError(f"step must be nonnegative, got {step!r}")
    if step == 0:
        return z.copy()
    if setup.p == 2:
        return z - step * g
    return conjugate_gradient(setup, prox_gradient(setup, z) - step * g)


_warned_small_n: set = set()


def rho_constant(n: int, q: float) -> float:
    """Sphere-direction constant ``min{q - 1, 16 ln n - 8} * n^(2/q - 1)``.

    Bounds ``E||e||_q^2`` for ``e`` uniform on the unit sphere when ``n >= 8``;
    smaller ``n`` is allowed with a warning.
    """
    if q not in (2, math.inf):
        raise ValueError(f"q must be 2 or inf, got {q!r}")
    if n < 8 and n not in _warned_small_n:
        _warned_small_n.add(n)
        log.warning("n < 8: rho_n hypothesis n >= 8 violated (n=%d), constant not certified", n)
    log_term = 16.0 * math.log(n) - 8.0
    if q == math.inf:
        val = log_term / n
    else:
        val = min(q - 1.0, log_term) * n ** (2.0 / q - 1.0)
    if val <= 0:
        raise ValueError(f"rho constant is not positive for n={n}")
    return val


def omega_constant(setup: Geometry) -> float:
    """Constant bounding ``2 E d((x - x*) / R)``; equals the prox coefficient."""
    base = setup.base if isinstance(setup, ShiftedProx) else setup
    return base.coeff


def setup_rho(setup: Geometry) -> float:
    return rho_constant(setup.n, setup.q)
