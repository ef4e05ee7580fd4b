"""Parameter plans for a target accuracy and evaluable convergence bounds.

Each plan splits the accuracy budget ``eps`` evenly across the additive terms
of the corresponding bound (six terms for the plain methods; half to the
geometric term and half to the ``2 * Delta`` floor for the restart schemes),
so ``bound_rhs`` evaluated at a plan never exceeds ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .algorithms import restart_constants, theoretical_delta
from .prox_geometry import Geometry, omega_constant, rho_constant

# shave plans slightly so float rounding cannot push a bound over eps
_SAFETY = 1.0 - 1e-9


@dataclass
class Plan:
    algorithm: str
    epsilon: float
    N: int
    m: int
    delta_zeta: float
    delta_eta: float
    oracle_calls: int
    K: Optional[int] = None
    N0: Optional[int] = None
    m_schedule: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _noise_term(delta_zeta, delta_eta):
    return math.sqrt(delta_zeta) / 2 + 2 * delta_eta


def bound_rhs(theorem: int, **params) -> float:
    """Right-hand side of the expected-suboptimality bound.

    ``theorem`` selects the method: 1 = accelerated, 2 = non-accelerated,
    3 / 4 = their restarted strongly convex variants.

    Parameters by theorem:
      1, 2: N, m, n, rho_n, L2, sigma_sq, Theta_p, delta_zeta, delta_eta
      3, 4: K, mu_p, R_p and either Delta, or (N0, n, rho_n, L2, Omega_p,
            delta_zeta, delta_eta) to compute it
    """
    def need(*names):
        missing = [k for k in names if k not in params]
        if missing:
            raise KeyError(f"bound_rhs({theorem}) missing parameters: {', '.join(missing)}")
        return [params[k] for k in names]

    if theorem in (1, 2):
        N, m, n, rho, L2, sig2, theta, dz, de = need(
            "N", "m", "n", "rho_n", "L2", "sigma_sq", "Theta_p", "delta_zeta", "delta_eta"
        )
        s = _noise_term(dz, de)
        if theorem == 1:
            return (
                384 * theta * n * n * rho * L2 / N**2
                + 4 * N / (n * L2) * sig2 / m
                + 61 * N / (24 * L2) * dz
                + 122 * N / (3 * L2) * de**2
                + 12 * math.sqrt(2 * n * theta) / N**2 * s
                + N**2 / (12 * n * rho * L2) * s**2
            )
        return (
            384 * n * rho * L2 * theta / N
            + 2 / L2 * sig2 / m
            + n / (12 * L2) * dz
            + 4 * n / (3 * L2) * de**2
            + 8 * math.sqrt(2 * n * theta) / N * s
            + N / (3 * L2 * rho) * s**2
        )
    if theorem in (3, 4):
        K, mu, R = need("K", "mu_p", "R_p")
        if "Delta" in params:
            delta = params["Delta"]
        else:
            N0, n, rho, L2, omega, dz, de = need(
                "N0", "n", "rho_n", "L2", "Omega_p", "delta_zeta", "delta_eta"
            )
            variant = "accelerated" if theorem == 3 else "nonaccelerated"
            delta = theoretical_delta(variant, N0, n, rho, L2, R, omega, dz, de)
        return mu * R * R / 2 * 2.0**-K + 2 * delta
    raise ValueError(f"theorem must be 1, 2, 3 or 4, got {theorem!r}")


def _check_eps(eps):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")


def _split_noise(s_max, dz_cap, de_cap):
    # half of the combined budget s = sqrt(dz)/2 + 2 de to each part
    dz = min(dz_cap, s_max * s_max) * _SAFETY
    de = min(de_cap, s_max / 4) * _SAFETY
    return dz, de


def plan_ardd(eps, n, setup: Geometry, L2, sigma_sq, Theta_p) -> Plan:
    _check_eps(eps)
    if not Theta_p > 0:
        raise ValueError("Theta_p must be positive")
    rho = rho_constant(n, setup.q)
    budget = eps / 6
    N = math.ceil(math.sqrt(384 * Theta_p * n * n * rho * L2 / budget))
    m = max(1, math.ceil(4 * N * sigma_sq / (n * L2 * budget)))
    s_max = min(
        budget * N * N / (12 * math.sqrt(2 * n * Theta_p)),
        math.sqrt(budget * 12 * n * rho * L2) / N,
    )
    dz, de = _split_noise(
        s_max, budget * 24 * L2 / (61 * N), math.sqrt(budget * 3 * L2 / (122 * N))
    )
    return Plan("ardd", eps, N, m, dz, de, N * m)


def plan_rdd(eps, n, setup: Geometry, L2, sigma_sq, Theta_p) -> Plan:
    _check_eps(eps)
    if not Theta_p > 0:
        raise ValueError("Theta_p must be positive")
    rho = rho_constant(n, setup.q)
    budget = eps / 6
    N = math.ceil(384 * n * rho * L2 * Theta_p / budget)
    m = max(1, math.ceil(2 * sigma_sq / (L2 * budget)))
    s_max = min(
        budget * N / (8 * math.sqrt(2 * n * Theta_p)),
        math.sqrt(budget * 3 * L2 * rho / N),
    )
    dz, de = _split_noise(s_max, budget * 12 * L2 / n, math.sqrt(budget * 3 * L2 / (4 * n)))
    return Plan("rdd", eps, N, m, dz, de, N * m)


def _plan_restart(accelerated, eps, n, setup, L2, sigma_sq, mu_p, R_p, a=None) -> Plan:
    _check_eps(eps)
    if not mu_p > 0:
        raise ValueError(f"mu_p must be positive, got {mu_p!r}")
    if not R_p > 0:
        raise ValueError(f"R_p must be positive, got {R_p!r}")
    rho = rho_constant(n, setup.q)
    omega = omega_constant(setup)
    consts = restart_constants(accelerated, n, rho, L2, omega, mu_p, a=a)
    N0 = consts.N0
    target = mu_p * R_p * R_p / eps
    K = 0 if target <= 1 else math.ceil(math.log2(target))
    schedule = [consts.batch_size(k, sigma_sq, L2, mu_p, R_p, accelerated) for k in range(K)]

    # Delta <= eps / 4, i.e. each of its four terms <= eps / 16
    budget = eps / 16
    radius = math.sqrt(2 * n * R_p * R_p * omega)
    if accelerated:
        dz_cap = budget * 24 * L2 / (61 * N0)
        de_cap = math.sqrt(budget * 3 * L2 / (122 * N0))
        s_max = min(budget * N0 * N0 / (12 * radius), math.sqrt(budget * 12 * n * rho * L2) / N0)
    else:
        dz_cap = budget * 12 * L2 / n
        de_cap = math.sqrt(budget * 3 * L2 / (4 * n))
        s_max = min(budget * N0 / (8 * radius), math.sqrt(budget * 3 * L2 * rho / N0))
    dz, de = _split_noise(s_max, dz_cap, de_cap)
    name = "arddsc" if accelerated else "rddsc"
    calls = sum(N0 * mk for mk in schedule)
    m0 = schedule[0] if schedule else 1
    return Plan(name, eps, N0, m0, dz, de, calls, K=K, N0=N0, m_schedule=schedule)


def plan_arddsc(eps, n, setup: Geometry, L2, sigma_sq, mu_p, R_p, *, a=None) -> Plan:
    return _plan_restart(True, eps, n, setup, L2, sigma_sq, mu_p, R_p, a)


def plan_rddsc(eps, n, setup: Geometry, L2, sigma_sq, mu_p, R_p, *, a=None) -> Plan:
    return _plan_restart(False, eps, n, setup, L2, sigma_sq, mu_p, R_p, a)


def plan_bound(plan: Plan, n, setup: Geometry, L2, sigma_sq, *, Theta_p=None, mu_p=None, R_p=None) -> float:
    """Evaluate the matching bound at a plan's own parameters."""
    rho = rho_constant(n, setup.q)
    common = dict(n=n, rho_n=rho, L2=L2, delta_zeta=plan.delta_zeta, delta_eta=plan.delta_eta)
    if plan.algorithm in ("ardd", "rdd"):
        theorem = 1 if plan.algorithm == "ardd" else 2
        return bound_rhs(theorem, N=plan.N, m=plan.m, sigma_sq=sigma_sq, Theta_p=Theta_p, **common)
    theorem = 3 if plan.algorithm == "arddsc" else 4
    return bound_rhs(
        theorem, K=plan.K, mu_p=mu_p, R_p=R_p, N0=plan.N0, Omega_p=omega_constant(setup), **common
    )
