import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cashband.model import DriftSign
from cashband.solver import from_barriers, solve_band, solve_classical
from cashband.verifier import verify, worst_case_generator
from conftest import base_params, ou_params, symmetric_params


def shifted(sol, which, delta):
    bars = [sol.x_lower, sol.x_star, sol.x_upper]
    bars[which] += delta
    return from_barriers(sol.params, *bars, models=sol.models)


@pytest.fixture(scope="module")
def symmetric_solution():
    return solve_band(symmetric_params())


def test_symmetric_solution_passes(symmetric_solution):
    report = verify(symmetric_solution, tol=1e-7)
    assert report.passed, report.to_text()
    assert report.grid_points == 2001


def test_base_and_ou_pass(base_solution, ou_solution):
    assert verify(base_solution).passed
    assert verify(ou_solution).passed


def test_perturbed_upper_barrier_fails_at_that_barrier(base_solution):
    s = base_solution
    coeffs = (s.coeff_a, s.coeff_b, s.coeff_c, s.coeff_d)
    report = verify(from_barriers(s.params, s.x_lower, s.x_star, s.x_upper + 0.1, models=s.models, coeffs=coeffs))
    assert not report.passed
    failing = [report[name] for name in ("pasting_slope", "pasting_curvature") if not report[name].passed]
    assert failing
    assert all(c.location == pytest.approx(base_solution.x_upper + 0.1) for c in failing)


def test_classical_and_general_paths_agree():
    p = base_params(kappa=0.0)
    a, b = verify(solve_band(p)), verify(solve_classical(p))
    assert [c.name for c in a.checks] == [c.name for c in b.checks]
    assert [c.passed for c in a.checks] == [c.passed for c in b.checks]
    assert a.passed and b.passed


@settings(max_examples=12, deadline=None)
@given(st.sampled_from([0, 1, 2]), st.sampled_from([-1e-3, 1e-3]))
def test_perturbation_is_detected(base_solution, which, delta):
    report = verify(shifted(base_solution, which, delta), tol=1e-5, transversality_sim=False)
    assert not report.passed


def test_cost_inequality_reported():
    s = solve_band(base_params())
    bad = from_barriers(s.params.with_(c_neg=0.3), s.x_lower, s.x_star, s.x_upper)
    report = verify(bad, transversality_sim=False)
    assert not report["cost_inequalities"].passed
    assert "c_neg" in report["cost_inequalities"].detail


def test_ordering_failure_short_circuits(base_solution):
    s = base_solution
    bad = from_barriers(s.params, 0.5, 1.0, s.x_upper, models=s.models)
    report = verify(bad)
    assert report.failed == ["ordering"] and len(report.checks) == 1


def test_report_serialisation(base_solution):
    report = verify(shifted(base_solution, 2, 0.1), transversality_sim=False)
    doc = json.loads(report.to_json())
    assert doc["passed"] is False
    assert {c["name"] for c in doc["checks"] if not c["passed"]} == set(report.failed)
    text = report.to_text()
    assert text.startswith("verification: FAIL")
    for name in report.failed:
        assert any(line.strip().startswith("FAIL " + name) for line in text.splitlines())


def test_generator_at_barriers(base_solution):
    s = base_solution
    assert worst_case_generator(s, s.x_lower) is DriftSign.MINUS
    assert worst_case_generator(s, s.x_upper) is DriftSign.PLUS
    assert worst_case_generator(s, s.x_star) is DriftSign.PLUS


@pytest.mark.parametrize("params", [base_params(), symmetric_params(), ou_params(), base_params(alpha=1.0)],
                         ids=["base", "symmetric", "ou", "drift"])
def test_generator_follows_slope_sign(params):
    s = solve_band(params)
    x = np.linspace(s.x_lower, s.x_upper, 1000)
    gens = np.array([worst_case_generator(s, v) is DriftSign.PLUS for v in x])
    assert np.count_nonzero(np.diff(gens)) == 1
    switch = x[np.argmax(gens)]
    assert s.x_star <= switch <= s.x_star + (x[1] - x[0])
    away = np.abs(x - s.x_star) > 1e-9
    assert np.array_equal(gens[away], s(x[away], 1)[...] > 0)
