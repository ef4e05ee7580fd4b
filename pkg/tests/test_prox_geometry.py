import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirgrad.prox_geometry import (
    DimensionError,
    ProxSetup,
    ShiftedProx,
    bregman,
    conjugate_gradient,
    mirror_step,
    norm,
    omega_constant,
    prox_gradient,
    prox_value,
    rho_constant,
)
from dirgrad.verification import brute_force_mirror_step


def coeff_by_hand(n):
    k = 1 + 1 / math.log(n)
    return math.e * n ** ((k - 1) * (2 - k) / k) * math.log(n)


@pytest.mark.parametrize("p,expected", [(2, 5.0), (1, 7.0), (math.inf, 4.0)])
def test_norm_examples(p, expected):
    assert norm([3.0, -4.0], p) == expected


def test_norm_rejects_empty():
    with pytest.raises(DimensionError):
        norm([], 2)


def test_setup_validation():
    with pytest.raises(ValueError):
        ProxSetup(3, 8)
    with pytest.raises(ValueError):
        ProxSetup(1, 1)


def test_prox_value_examples():
    assert prox_value(ProxSetup(2, 2), [1.0, 1.0]) == 1.0
    s = ProxSetup(1, 8)
    assert prox_value(s, np.zeros(8)) == 0.0
    e1 = np.eye(8)[0]
    assert prox_value(s, e1) == pytest.approx(coeff_by_hand(8) / 2, rel=1e-14)


def test_prox_gradient_examples():
    np.testing.assert_array_equal(prox_gradient(ProxSetup(2, 2), [2.0, -3.0]), [2.0, -3.0])
    np.testing.assert_array_equal(prox_gradient(ProxSetup(1, 8), np.zeros(8)), np.zeros(8))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        prox_value(ProxSetup(2, 3), [1.0, 2.0])
    with pytest.raises(DimensionError):
        ShiftedProx(ProxSetup(2, 3), np.zeros(2), 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    s = ProxSetup(1, 8)
    x = rng.standard_normal(8)
    h = 1e-6
    fd = np.array([(prox_value(s, x + h * e) - prox_value(s, x - h * e)) / (2 * h) for e in np.eye(8)])
    g = prox_gradient(s, x)
    assert np.max(np.abs(fd - g)) <= 1e-6 * np.max(np.abs(g))


@pytest.mark.parametrize("p", [1, 2])
def test_strong_convexity_1000_pairs(p):
    rng = np.random.default_rng(10 + p)
    for n in (8, 50):
        s = ProxSetup(p, n)
        for _ in range(500):
            x = rng.standard_normal(n) * rng.uniform(0.01, 10)
            y = rng.standard_normal(n) * rng.uniform(0.01, 10)
            lhs = prox_value(s, y) - prox_value(s, x) - prox_gradient(s, x) @ (y - x)
            assert lhs >= 0.5 * norm(y - x, p) ** 2 - 1e-9 * max(1.0, abs(lhs))


def test_bregman_examples():
    assert bregman(ProxSetup(2, 2), [1.0, 0.0], [0.0, 1.0]) == 1.0
    rng = np.random.default_rng(0)
    for setup in (ProxSetup(1, 8), ProxSetup(2, 8), ShiftedProx(ProxSetup(1, 8), rng.standard_normal(8), 0.7)):
        z = rng.standard_normal(8)
        assert bregman(setup, z, z) == 0.0
    s = ProxSetup(1, 8)
    for _ in range(200):
        z, x = rng.standard_normal(8), rng.standard_normal(8)
        assert bregman(s, z, x) >= 0.5 * norm(x - z, 1) ** 2 - 1e-12


@settings(max_examples=200, deadline=None)
@given(
    st.integers(2, 64),
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=64, max_size=64),
)
def test_mirror_roundtrip(n, values):
    x = np.array(values[:n])
    s = ProxSetup(1, n)
    back = conjugate_gradient(s, prox_gradient(s, x))
    scale = max(1.0, np.max(np.abs(x)))
    assert np.max(np.abs(back - x)) <= 1e-10 * scale


def test_mirror_step_examples():
    np.testing.assert_allclose(mirror_step(ProxSetup(2, 2), [1.0, 1.0], [2.0, 0.0], 0.5), [0.0, 1.0])
    rng = np.random.default_rng(3)
    z = rng.standard_normal(8)
    for setup in (ProxSetup(1, 8), ProxSetup(2, 8), ShiftedProx(ProxSetup(1, 8), z, 2.0)):
        np.testing.assert_array_equal(mirror_step(setup, z, rng.standard_normal(8), 0.0), z)
    with pytest.raises(ValueError):
        mirror_step(ProxSetup(2, 8), z, z, -1.0)


def test_mirror_step_matches_brute_force():
    rng = np.random.default_rng(4)
    s = ProxSetup(1, 8)
    for _ in range(20):
        z, g, step = rng.standard_normal(8), rng.standard_normal(8), rng.uniform(0.01, 1)
        np.testing.assert_allclose(mirror_step(s, z, g, step), brute_force_mirror_step(s, z, g, step), atol=1e-6)


def test_shifted_equivalence():
    rng = np.random.default_rng(5)
    base = ProxSetup(1, 8)
    u = rng.standard_normal(8)
    R = 1.7
    sh = ShiftedProx(base, u, R)
    x = rng.standard_normal(8)
    assert prox_value(sh, x) == pytest.approx(R * R * prox_value(base, (x - u) / R), rel=1e-14)
    np.testing.assert_allclose(prox_gradient(sh, x), R * prox_gradient(base, (x - u) / R), rtol=1e-14)
    y = rng.standard_normal(8)
    np.testing.assert_allclose(conjugate_gradient(sh, prox_gradient(sh, x)), x, atol=1e-12)
    assert sh.n == 8 and sh.p == 1
    # the center is a private copy
    u[0] += 1
    assert sh.center[0] != u[0]
    assert conjugate_gradient(sh, y).shape == (8,)


def test_shifted_euclidean_bregman_is_half_squared_distance():
    rng = np.random.default_rng(6)
    sh = ShiftedProx(ProxSetup(2, 5), rng.standard_normal(5), 0.3)
    z, x = rng.standard_normal(5), rng.standard_normal(5)
    assert bregman(sh, z, x) == pytest.approx(0.5 * np.sum((x - z) ** 2), rel=1e-14)


def test_rho_examples():
    assert rho_constant(8, 2) == 1.0
    assert rho_constant(100, math.inf) == pytest.approx((16 * math.log(100) - 8) / 100, rel=1e-15)
    assert rho_constant(100, math.inf) == pytest.approx(0.6568, abs=1e-4)
    assert rho_constant(8, math.inf) == pytest.approx(3.159, abs=1e-3)
    with pytest.raises(ValueError):
        rho_constant(8, 3)


def test_rho_small_n_warns(caplog):
    with caplog.at_level("WARNING"):
        rho_constant(5, 2)
    assert "n < 8" in caplog.text


def test_omega_examples():
    assert omega_constant(ProxSetup(2, 17)) == 1.0
    assert omega_constant(ProxSetup(1, 8)) == pytest.approx(coeff_by_hand(8), rel=1e-14)
    ns = np.unique(np.logspace(math.log10(8), 6, 60).astype(int))
    ratios = [omega_constant(ProxSetup(1, int(n))) / math.log(n) for n in ns]
    # bounded by a fixed constant (e^2 bounds the n-power factor)
    assert max(ratios) <= math.e**2
