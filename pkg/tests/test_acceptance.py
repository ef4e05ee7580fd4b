"""Acceptance criteria at their stated tolerances.

Each test records a one-line PASS/FAIL verdict; ``conftest.py`` prints the
collected lines at the end of the session. Run directly with
``python3 tests/test_acceptance.py`` to print them without pytest.
"""

import json
import math
import time

import numpy as np
import pytest

from dirgrad import cli
from dirgrad.algorithms import run_ardd, run_arddsc, run_rdd, run_rddsc
from dirgrad.config import from_dict
from dirgrad.oracle import NoiseModel, implied_noise_levels, make_quadratic
from dirgrad.prox_geometry import ProxSetup, bregman, norm, rho_constant
from dirgrad.verification import check_estimator_identity, check_fd_noise_bounds, check_lemma1

RESULTS = {}


def record(num, title, ok, elapsed, limit, detail):
    within = elapsed < limit
    verdict = "PASS" if ok and within else "FAIL"
    line = f"{verdict} criterion {num:>2} {title}: {detail} ({elapsed:.1f}s, limit {limit:g}s)"
    RESULTS[num] = line
    print(line)
    return ok and within


def quad16():
    # n = 16, L2 = 1, noiseless, dense minimizer
    return make_quadratic(16, rng=np.random.default_rng(1))


def test_c01_sphere_constants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    reports = [r for n in (8, 100) for q in (2.0, math.inf) for r in check_lemma1(n, q, 100_000, rng)]
    bad = [r.name for r in reports if not r.passed]
    ok = record(1, "sphere moment constants", not bad, time.perf_counter() - t0, 10,
                f"{len(reports) - len(bad)}/{len(reports)} one-sided 3SE checks" + (f" failed: {bad}" if bad else ""))
    assert ok


def test_c02_estimator_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    reports = []
    for n in (8, 64):
        obj = make_quadratic(n, spectrum=np.linspace(0.1, 1.0, n), rng=rng)
        reports += check_estimator_identity(obj, obj.x_star + rng.standard_normal(n), 100_000, rng)
    bad = [r.name for r in reports if not r.passed]
    ok = record(2, "estimator identities", not bad, time.perf_counter() - t0, 10,
                f"{len(reports) - len(bad)}/{len(reports)} checks" + (f" failed: {bad}" if bad else ""))
    assert ok


def test_c03_mirror_step():
    t0 = time.perf_counter()
    reports = cli.run_suite("mirror", [8, 32], instances=100, seed=103)
    worst = max(r.mean for r in reports)
    ok = record(3, "closed-form mirror step vs brute force", all(r.passed for r in reports),
                time.perf_counter() - t0, 30, f"worst max-norm gap {worst:.2e} <= 1e-6")
    assert ok


def _bound_sweep(runner, rhs, seeds=20, Ns=(64, 128, 256, 512)):
    obj = quad16()
    x0 = np.zeros(16)
    violations, margins = [], []
    for p in (1, 2):
        setup = ProxSetup(p, 16)
        theta = bregman(setup, x0, obj.x_star)
        rho = rho_constant(16, setup.q)
        gaps = []
        for s in range(seeds):
            _, rec = runner(obj, NoiseModel(), setup, x0, max(Ns), 1, np.random.default_rng(s), checkpoints=Ns)
            by_k = dict(zip(rec.ks().tolist(), rec.gaps().tolist()))
            gaps.append([by_k[N] for N in Ns])
        mean = np.mean(gaps, axis=0)
        for N, g in zip(Ns, mean):
            b = rhs(theta, rho, N)
            margins.append(g / b)
            if not g <= b:
                violations.append((p, N))
    return violations, max(margins)


def test_c04_accelerated_bound():
    t0 = time.perf_counter()
    viol, worst = _bound_sweep(run_ardd, lambda th, rho, N: 384 * th * 16**2 * rho * 1.0 / N**2)
    ok = record(4, "accelerated noiseless bound", not viol, time.perf_counter() - t0, 60,
                f"violations {viol or 0}, worst gap/bound {worst:.3g}")
    assert ok


def test_c05_nonaccelerated_bound():
    t0 = time.perf_counter()
    viol, worst = _bound_sweep(run_rdd, lambda th, rho, N: 384 * 16 * rho * 1.0 * th / N)
    ok = record(5, "non-accelerated noiseless bound", not viol, time.perf_counter() - t0, 60,
                f"violations {viol or 0}, worst gap/bound {worst:.3g}")
    assert ok


def test_c06_rate_separation():
    t0 = time.perf_counter()
    cfg = from_dict({
        "problem": {"n": 16, "seed": 1},
        "geometry": {"p": 2},
        "algorithm": "ardd",
        "parameters": {"N": 1024, "m": 1},
        "sweep": {"axis": "N", "values": [2**j for j in range(5, 11)], "algorithms": ["ardd", "rdd"], "p": [2]},
        "seeds": list(range(20)),
    })
    slopes = cli.sweep_report(cfg, cli.sweep_table(cfg))["slopes"]
    a, r = slopes["ardd/p=2"], slopes["rdd/p=2"]
    ok_a, ok_r = a <= -1.7, -1.3 <= r <= -0.7
    ok = record(6, "rate separation", ok_a and ok_r, time.perf_counter() - t0, 120,
                f"accelerated slope {a:.3f} (need <= -1.7: {'ok' if ok_a else 'no'}), "
                f"non-accelerated slope {r:.3f} (need in [-1.3, -0.7]: {'ok' if ok_r else 'no'})")
    assert ok


# (label, runner, p, sigma, inner-length constant a)
RESTART_CASES = [
    ("arddsc", run_arddsc, 2, 0.0, 384.0),
    ("arddsc", run_arddsc, 2, 0.1, 384.0),
    ("rddsc", run_rddsc, 2, 0.0, 96.0),
    ("rddsc", run_rddsc, 2, 0.1, 96.0),
    ("arddsc", run_arddsc, 1, 0.0, 384.0),
]


def test_c07_restart_contraction():
    t0 = time.perf_counter()
    n, K = 8, 6
    failures, worst = [], 0.0
    for label, runner, p, sigma, a in RESTART_CASES:
        obj = make_quadratic(n, spectrum=np.linspace(0.1, 1.0, n), sigma=sigma, mu=0.1, rng=np.random.default_rng(1))
        setup = ProxSetup(p, n)
        x0 = np.zeros(n)
        R = norm(x0 - obj.x_star, p)
        mu = obj.strong_convexity(p)
        gaps = []
        for s in range(10):
            _, rec = runner(obj, NoiseModel(), setup, x0, R, K, np.random.default_rng(700 + s), a=a)
            gaps.append(rec.gaps())
        delta = rec.params["Delta"]
        mean = np.mean(gaps, axis=0)
        for k in range(1, K + 1):
            bound = mu * R * R / 2 * 2.0**-k + 2 * delta
            worst = max(worst, mean[k] / bound)
            if not mean[k] <= bound:
                failures.append((label, p, sigma, k))
    ok = record(7, "restart contraction", not failures, time.perf_counter() - t0, 300,
                f"{len(RESTART_CASES)} configurations x K=1..6, violations {failures or 0}, worst gap/bound {worst:.3g}")
    assert ok


def test_c08_finite_difference_reduction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(108)
    reports = []
    for spectrum in (np.ones(8), np.linspace(0.1, 1.0, 8)):
        obj = make_quadratic(8, spectrum=spectrum, rng=rng)
        reports += check_fd_noise_bounds(obj, 0.1, 1e-4, 10_000, rng)
    dz, de = implied_noise_levels(0.1, 1.0, 1e-4)
    # 0.1 is not a binary fraction: the correctly rounded t^2/4 is one ulp above 0.0025
    levels_ok = math.isclose(dz, 0.0025, rel_tol=2.2e-16) and de == 0.002
    bad = [r.name for r in reports if not r.passed]
    ok = record(8, "finite-difference reduction", not bad and levels_ok, time.perf_counter() - t0, 5,
                f"{len(reports) - len(bad)}/{len(reports)} audits over 10^4 calls, implied levels ({dz!r}, {de!r})")
    assert ok


def test_c09_dimension_scaling():
    t0 = time.perf_counter()
    cfg = from_dict({
        "problem": {"n": 16, "sparse": True, "seed": 1},
        "algorithm": "ardd",
        "sweep": {"axis": "n", "values": [16, 64, 256], "algorithms": ["ardd"], "p": [1, 2], "epsilon": 0.2},
        "seeds": [0, 1, 2],
    })
    rows = cli.sweep_table(cfg)
    ratios = cli.sweep_report(cfg, rows)["call_ratio_p2_over_p1"]["ardd"]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    reached = all(r[3] <= 0.2 for r in rows)
    ok = record(9, "dimension scaling", increasing and reached, time.perf_counter() - t0, 600,
                "oracle-call ratio p=2/p=1 " + ", ".join(f"{x:.4f}" for x in ratios)
                + f" (strictly increasing: {increasing}; planned runs reach eps: {reached})")
    assert ok


def test_c10_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "problem": {"n": 16, "sigma_sq": 0.01, "seed": 3},
        "oracle": {"kind": "finite-difference", "t": 0.01, "Delta": 1e-5},
        "geometry": {"p": 1},
        "algorithm": "ardd",
        "parameters": {"N": 300, "m": 2},
        "seeds": [7],
    }))
    codes = [cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    same = (tmp_path / "a" / "trace-seed7.csv").read_bytes() == (tmp_path / "b" / "trace-seed7.csv").read_bytes()
    ok = record(10, "determinism", codes == [0, 0] and same, time.perf_counter() - t0, 10,
                f"byte-identical traces: {same}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
