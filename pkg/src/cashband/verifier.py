"""Check a candidate band against the sufficient optimality conditions.

Each check reports its worst violation and where it occurred.  The
transversality condition is checked for the band policy itself: the state is
confined to ``[x_lower, x_upper]`` so ``e^{-rho T} J*(X_T)`` is bounded by a
decaying exponential, and a short simulation confirms the decay.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import DriftSign, feasibility_check, holding_cost
from .solver import BandSolution

DEFAULT_TOL = 1e-7


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    location: float | None
    tol: float
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]
    grid_points: int
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", all(c.passed for c in self.checks))

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "grid_points": self.grid_points, "checks": [asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"verification: {'PASS' if self.passed else 'FAIL'} (grid {self.grid_points} points per region)"]
        for c in self.checks:
            where = "" if c.location is None else f" at x={c.location:.9g}"
            extra = f"  [{c.detail}]" if c.detail else ""
            lines.append(f"  {'ok  ' if c.passed else 'FAIL'} {c.name:<22} worst={c.worst:.3e}{where} tol={c.tol:.1e}{extra}")
        return "\n".join(lines)


def worst_case_generator(solution: BandSolution, x: float) -> DriftSign:
    """Drift shift of the worst-case prior at ``x``: down below ``x_star``, up from it."""
    return DriftSign.MINUS if x < solution.x_star else DriftSign.PLUS


def _worst(values, xs, tol, name, detail=""):
    values = np.asarray(values, dtype=float)
    xs = np.broadcast_to(np.asarray(xs, dtype=float), values.shape)
    if values.size == 0:
        return CheckResult(name, True, 0.0, None, tol, detail)
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        return CheckResult(name, False, math.inf, float(xs[i]), tol, detail)
    i = int(np.argmax(values))
    return CheckResult(name, bool(values[i] <= tol), float(values[i]), float(xs[i]), tol, detail)


def _hjb(solution, xs, branch):
    """Residual of 0.5 sigma^2 phi'' + drift phi' - rho phi + c, drift shift chosen by the sign of phi'.

    Scaled by the size of the largest term (floored at 1).
    """
    p = solution.params
    v, d1, d2 = branch(xs, 0), branch(xs, 1), branch(xs, 2)
    up = d1 >= 0
    drift = np.where(up, p.drift(xs, DriftSign.PLUS), p.drift(xs, DriftSign.MINUS))
    terms = [0.5 * p.sigma**2 * d2, drift * d1, -p.rho * v, holding_cost(xs, p)]
    scale = np.maximum(1.0, np.max(np.abs(terms), axis=0))
    return np.abs(sum(terms)) / scale


def _decay(solution, horizon_factor=50.0, n_paths=64, seed=0):
    from .simulator import SimConfig, _Dynamics, _run

    p = solution.params
    cfg = SimConfig(n_paths=n_paths, dt=min(0.5 / p.rho, 1.0), horizon=horizon_factor / p.rho, seed=seed)
    dyn = _Dynamics.build(p, solution.x_lower, solution.x_star, solution.x_upper)
    _, _, _, xend = _run(dyn, cfg, [("switching", 0.0)], threads=1)
    return math.exp(-p.rho * cfg.n_steps * cfg.dt) * float(np.mean(np.abs(solution(xend[:, 0]))))


def verify(
    solution: BandSolution,
    grid_points: int = 2001,
    tol: float = DEFAULT_TOL,
    tolerances: dict | None = None,
    transversality_sim: bool = True,
) -> VerificationReport:
    """Run every check; ``tolerances`` overrides ``tol`` per check name."""
    tols = dict(tolerances or {})

    def t(name):
        return tols.get(name, tol)

    s = solution
    p = s.params
    xl, xs_, xu = s.x_lower, s.x_star, s.x_upper
    checks = []

    order_gap = max(xl - xs_, xs_ - xu, xl, -xu, 0.0)
    ordered = xl < xs_ < xu and xl < 0 < xu
    checks.append(CheckResult("ordering", ordered, order_gap, None, 0.0, "x_lower < x_star < x_upper, x_lower < 0 < x_upper"))
    if not ordered or not all(map(math.isfinite, (xl, xs_, xu))):
        return VerificationReport(tuple(checks), grid_points)

    lo = np.linspace(xl, xs_, grid_points)
    hi = np.linspace(xs_, xu, grid_points)
    checks.append(_worst(
        np.concatenate([_hjb(s, lo, s.lower_branch), _hjb(s, hi, s.upper_branch)]),
        np.concatenate([lo, hi]), t("hjb"), "hjb", "relative to the largest term",
    ))

    slopes = [abs(s.lower_branch(xl, 1) + p.l_cost), abs(s.upper_branch(xu, 1) - p.u_cost)]
    checks.append(_worst(slopes, [xl, xu], t("pasting_slope"), "pasting_slope"))
    curv = [abs(s.lower_branch(xl, 2)), abs(s.upper_branch(xu, 2))]
    checks.append(_worst(curv, [xl, xu], t("pasting_curvature"), "pasting_curvature"))

    # one-sided differences from inside the band against the analytic slopes
    h_l, h_u = 1e-6 * (1 + abs(xl)), 1e-6 * (1 + abs(xu))
    fd = [
        abs((s(xl + h_l) - s.lower_branch(xl)) / h_l - s.lower_branch(xl, 1)),
        abs((s.upper_branch(xu) - s(xu - h_u)) / h_u - s.upper_branch(xu, 1)),
    ]
    checks.append(_worst(fd, [xl, xu], t("barrier_fd") if "barrier_fd" in tols else 1e-4, "barrier_fd",
                         "one-sided difference vs analytic slope"))

    feas = feasibility_check(p)
    checks.append(CheckResult("cost_inequalities", feas.passed, float(len(feas.violations)), None, 0.0,
                              "; ".join(feas.violations)))

    switch = [
        abs(s.lower_branch(xs_, 1)),
        abs(s.upper_branch(xs_, 1)),
        abs(s.lower_branch(xs_, 2) - s.upper_branch(xs_, 2)),
        abs(s.lower_branch(xs_) - s.upper_branch(xs_)),
    ]
    checks.append(_worst(switch, xs_, t("switch_point"), "switch_point", "slopes, curvature jump, value jump"))

    both = np.concatenate([lo[:-1], hi])
    second = np.concatenate([s.lower_branch(lo[:-1], 2), s.upper_branch(hi, 2)])
    checks.append(_worst(-second, both, t("convexity"), "convexity"))
    values = np.concatenate([s.lower_branch(lo[:-1]), s.upper_branch(hi)])
    checks.append(_worst(-values, both, 0.0, "nonnegativity"))

    decay = _decay(s) if transversality_sim else 0.0
    checks.append(CheckResult("transversality", decay <= t("transversality"), decay, None, t("transversality"),
                              "bounded band; simulated e^{-rho T} E|J*(X_T)| at T=50/rho"))
    return VerificationReport(tuple(checks), grid_points)
