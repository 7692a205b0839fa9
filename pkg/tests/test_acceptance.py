"""Acceptance criteria 1 to 10; each test prints one PASS/FAIL line.

The lines are repeated in the pytest terminal summary.  Run this file alone
with ``pytest tests/test_acceptance.py -v``.
"""

import logging
import math
import time

import numpy as np
import pytest

from cashband.model import DriftSign, affine_coeffs
from cashband.simulator import SimConfig, simulate_cost, simulate_costs, simulate_uncontrolled
from cashband.solver import SolverError, solve_band, solve_classical
from cashband.sweep import SweepSpec, run_sweep
from cashband.verifier import verify
from conftest import base_params, ou_params, symmetric_params

log = logging.getLogger(__name__)

pytestmark = pytest.mark.slow

FIELDS = ("x_lower", "x_star", "x_upper", "coeff_a", "coeff_b", "coeff_c", "coeff_d")
SIGMAS = [float(s) for s in range(1, 11)]


def test_c01_residual_closure(acceptance):
    p = base_params()
    simulate_cost(solve_band(p), SimConfig(n_paths=2, dt=0.5))  # one-off JIT compilation, not timed
    t0 = time.perf_counter()
    sol = solve_band(p)
    report = verify(sol, tol=1e-7)
    elapsed = time.perf_counter() - t0
    res = float(np.abs(sol.residual_vector()).max())
    ok = res < 1e-9 and report.passed and elapsed < 1.0
    acceptance(1, ok, f"|r|inf={res:.1e}, verifier {'pass' if report.passed else report.failed}, {elapsed:.2f}s")
    assert ok, report.to_text()


def test_c02_symmetry(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for sigma in SIGMAS:
        for kappa in (0.0, 0.5, 1.0):
            s = solve_band(symmetric_params(sigma=sigma, kappa=kappa))
            worst = max(worst, abs(s.x_upper + s.x_lower), abs(s.x_star))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-7 and elapsed < 5.0
    acceptance(2, ok, f"max |x_U+x_L|, |x*| = {worst:.1e} over 30 solves, {elapsed:.2f}s")
    assert ok


def test_c03_classical_limit(acceptance):
    worst = 0.0
    for sigma in SIGMAS:
        p = base_params(sigma=sigma, kappa=0.0)
        a, b = solve_band(p), solve_classical(p)
        worst = max(worst, max(abs(getattr(a, f) - getattr(b, f)) for f in FIELDS))
    ok = worst < 1e-8
    acceptance(3, ok, f"max barrier/coefficient difference {worst:.1e}")
    assert ok


def test_c04_monte_carlo_agreement(acceptance, base_solution):
    s = base_solution
    cfg = SimConfig(n_paths=10_000, dt=1e-3, horizon=100.0, seed=20240601)
    t0 = time.perf_counter()
    out = simulate_costs(s, cfg, [s.x_lower, 0.0, s.x_upper])
    elapsed = time.perf_counter() - t0
    parts, ok = [], elapsed < 60.0
    for (_, x0), est in out.items():
        exact = s(x0)
        z = (est.mean_cost - exact) / est.std_error
        rel = abs(est.mean_cost - exact) / exact
        ok &= abs(z) <= 3 and rel < 0.02 and est.truncation_bound < est.std_error / 10
        parts.append(f"x0={x0:+.3f} z={z:+.2f} rel={rel:.2%}")
    acceptance(4, ok, "; ".join(parts) + f"; {elapsed:.0f}s")
    assert ok


def test_c05_uncontrolled_closed_form(acceptance):
    p = base_params(sigma=2.0, kappa=0.0)
    exact = p.sigma / (math.sqrt(2) * p.rho**1.5)
    cfg = SimConfig(n_paths=100_000, dt=1e-2, horizon=120.0, seed=7)
    est = simulate_uncontrolled(p, cfg, scenario="zero")
    z = (est.mean_cost - exact) / est.std_error
    ok = abs(z) <= 3 and abs(exact - 44.72136) < 1e-5
    acceptance(5, ok, f"estimate {est.mean_cost:.4f} vs {exact:.5f}, z={z:+.2f}")
    assert ok


def test_c06_width_in_sigma_and_kappa(acceptance):
    spec = SweepSpec(symmetric_params(), "sigma", np.linspace(1, 10, 50),
                     overlays=(("kappa", 0.0), ("kappa", 0.5), ("kappa", 1.0)))
    rows = run_sweep(spec)
    failed = sum(not r.converged for r in rows)
    w = np.array([r.width for r in rows]).reshape(3, 50)
    monotone = int(np.sum(np.diff(w, axis=1) < 0))
    ordering = int(np.sum(w[1] > w[0]) + np.sum(w[2] > w[1]))
    ok = failed == 0 and monotone == 0 and ordering == 0
    acceptance(6, ok, f"{failed} failed rows, {monotone} monotonicity and {ordering} ordering violations")
    assert ok


def _dominance_violations(sols):
    lo = min(s.x_lower for s in sols) - 2
    hi = max(s.x_upper for s in sols) + 2
    x = np.linspace(lo, hi, 200)
    j = [s(x) for s in sols]
    return int(sum(np.sum(a > b + 1e-9) for a, b in zip(j, j[1:])))


def test_c07_cost_dominance(acceptance):
    by_kappa = [solve_band(base_params(kappa=k)) for k in (0.0, 0.5, 1.0)]
    by_sigma = [solve_band(base_params(sigma=s)) for s in (3.0, 5.4, 8.0)]
    vk, vs = _dominance_violations(by_kappa), _dominance_violations(by_sigma)
    ok = vk == 0 and vs == 0
    acceptance(7, ok, f"{vk} violations in kappa, {vs} in sigma")
    assert ok


def test_c08_convexity_and_pasting(acceptance):
    rng = np.random.default_rng(20240601)
    failures, bad, done = [], [], 0
    while done < 200:
        p = base_params(alpha=rng.uniform(-2, 2), sigma=rng.uniform(1, 10), kappa=rng.uniform(0, 1),
                        c_neg=rng.uniform(1, 6), c_pos=rng.uniform(1, 6),
                        l_cost=rng.uniform(2, 6), u_cost=rng.uniform(2, 6))
        done += 1
        try:
            s = solve_band(p)
        except SolverError as exc:
            failures.append(p)
            log.warning("no convergence for %s: %s", p, exc)
            continue
        x = np.linspace(s.x_lower, s.x_upper, 1000)
        br = np.abs(s.barrier_residuals())
        if s(x, 2).min() < -1e-8 or br[[0, 2]].max() >= 1e-7 or br[[1, 3]].max() >= 1e-6:
            bad.append(p)
    ok = not bad and len(failures) < 10
    acceptance(8, ok, f"200 configurations: {len(failures)} non-convergent, {len(bad)} check failures")
    assert ok


def _second_difference(f, x, h):
    return (f(x + h) - 2 * f(x) + f(x - h)) / h**2


def test_c09_ou_support(acceptance, ou_solution):
    p = ou_params()
    worst = 0.0
    for sign in DriftSign:
        pair = ou_solution.models[sign].pair
        lo, hi = pair.interval
        h = 4e-3
        x = np.linspace(lo + h, hi - h, 2001)
        for f in (pair.increasing, pair.decreasing):
            # Richardson-extrapolated second differences: the h^2 error would dominate far out
            d2 = (4 * _second_difference(f, x, h / 2) - _second_difference(f, x, h)) / 3
            terms = np.abs([0.5 * p.sigma**2 * d2, p.drift(x, sign) * f(x, 1), p.rho * f(x)])
            res = np.abs(0.5 * p.sigma**2 * d2 + p.drift(x, sign) * f(x, 1) - p.rho * f(x))
            worst = max(worst, float((res / terms.max(axis=0)).max()))
    parts, ok = [f"ODE residual {worst:.1e} (relative, interval {lo:.1f}..{hi:.1f})"], worst < 1e-6
    for scenario, x0 in (("plus", 0.0), ("minus", 3.0)):
        cfg = SimConfig(n_paths=20_000, dt=1e-2, horizon=120.0, seed=9, x0=x0)
        est = simulate_uncontrolled(p, cfg, scenario=scenario, integrand="state")
        exact = affine_coeffs(p, DriftSign.PLUS if scenario == "plus" else DriftSign.MINUS)(x0)
        z = (est.mean_cost - exact) / est.std_error
        ok &= abs(z) <= 3
        parts.append(f"{scenario} x0={x0:g}: z={z:+.2f}")
    acceptance(9, ok, "; ".join(parts))
    assert ok


def test_c10_worst_case_dominance(acceptance, base_solution):
    s = base_solution
    cfg = SimConfig(n_paths=10_000, dt=1e-2, horizon=100.0, seed=424242)
    out = simulate_costs(s, cfg, [s.x_lower, 0.0, s.x_upper], ("switching", "minus", "zero", "plus"))
    parts, ok = [], True
    for x0 in (s.x_lower, 0.0, s.x_upper):
        worst = out[("switching", x0)]
        for scenario in ("minus", "zero", "plus"):
            est = out[(scenario, x0)]
            margin = (worst.mean_cost + 3 * worst.std_error - est.mean_cost) / worst.std_error
            ok &= margin >= 0
            parts.append(f"{scenario}@{x0:+.2f}:{margin:+.1f}")
    acceptance(10, ok, "margin in switching SEs " + " ".join(parts))
    assert ok
