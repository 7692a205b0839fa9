"""Free-boundary solver for the optimal control band.

On the lower part of the inaction region the cost function is
``R_minus + A*phi_inc_minus + B*phi_dec_minus``; on the upper part
``R_plus + C*phi_inc_plus + D*phi_dec_plus``.  The barriers are pinned by
smooth pasting (slope ``-l_cost``/``u_cost``, zero curvature), and the switch
point ``x_star`` by a zero slope from both sides with matching curvature.

The coefficients are eliminated in closed form, leaving three residuals in
``(x_lower, x_star, x_upper)`` that are driven to zero by damped Newton.
Starting points come from the unambiguous problem or, failing that, from a
one-dimensional shooting scan over ``x_lower``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .model import (
    DriftSign,
    IntervalError,
    ModelParams,
    PerpetualCost,
    RegionModels,
    feasibility_check,
    length_scale,
    region_models,
)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class FeasibilityError(SolverError):
    def __init__(self, violations):
        self.violations = tuple(violations)
        super().__init__("infeasible parameters: " + "; ".join(self.violations))


class NoBandError(SolverError):
    """The coarse scan found no sign change to bracket a band."""


class ConvergenceError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    max_iters: int = 60
    damping: float = 1.0
    scan_grid: int = 24
    fd_step: float = 1e-6
    max_halvings: int = 20
    ordering_eps: float = 1e-10
    shot_grid: int = 400
    window: float | None = None

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be a positive integer")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if int(self.scan_grid) < 8:
            raise ValueError("scan_grid must be at least 8")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if self.window is not None and not self.window > 0:
            raise ValueError("window must be positive")


# -- coefficient elimination -------------------------------------------------

def _pasting(cost: PerpetualCost, x: float, slope: float, curvature: float) -> tuple[float, float]:
    """Coefficients (p, q) on (phi_inc, phi_dec) giving ``cost + p*inc + q*dec``
    the prescribed slope and curvature at ``x``."""
    pair = cost.pair
    i1, i2 = pair.increasing(x, 1), pair.increasing(x, 2)
    d1, d2 = pair.decreasing(x, 1), pair.decreasing(x, 2)
    r1 = slope - cost(x, 1)
    r2 = curvature - cost(x, 2)
    det = d2 * i1 - d1 * i2
    if det == 0 or not math.isfinite(det):
        raise ArithmeticError(f"singular pasting system at x={x:g} (det={det})")
    return (d2 * r1 - d1 * r2) / det, (-i2 * r1 + i1 * r2) / det


def coeffs_lower(x_lower: float, params: ModelParams, cost_minus: PerpetualCost) -> tuple[float, float]:
    """(A, B) such that slope is ``-l_cost`` and curvature 0 at ``x_lower``."""
    return _pasting(cost_minus, x_lower, -params.l_cost, 0.0)


def coeffs_upper(x_upper: float, params: ModelParams, cost_plus: PerpetualCost) -> tuple[float, float]:
    """(C, D) such that slope is ``u_cost`` and curvature 0 at ``x_upper``."""
    return _pasting(cost_plus, x_upper, params.u_cost, 0.0)


def _branch(cost: PerpetualCost, p: float, q: float, x, order: int):
    return cost(x, order) + p * cost.pair.increasing(x, order) + q * cost.pair.decreasing(x, order)


def _terms(cost: PerpetualCost, p: float, q: float, x: float, order: int) -> float:
    """Sum of absolute sizes of the terms in a branch value; the cancellation scale."""
    return abs(cost(x, order)) + abs(p * cost.pair.increasing(x, order)) + abs(q * cost.pair.decreasing(x, order))


def _residuals_scaled(x_lower, x_star, x_upper, params, models):
    a, b = coeffs_lower(x_lower, params, models.minus)
    c, d = coeffs_upper(x_upper, params, models.plus)
    lo, hi = models.minus, models.plus
    r = np.array([
        _branch(lo, a, b, x_star, 1),
        _branch(hi, c, d, x_star, 1),
        _branch(lo, a, b, x_star, 2) - _branch(hi, c, d, x_star, 2),
    ])
    scale = np.array([
        _terms(lo, a, b, x_star, 1),
        _terms(hi, c, d, x_star, 1),
        _terms(lo, a, b, x_star, 2) + _terms(hi, c, d, x_star, 2),
    ])
    return r, np.maximum(1.0, scale)


def residuals(x_lower, x_star, x_upper, params: ModelParams, models: RegionModels | None = None) -> np.ndarray:
    """Switch-point conditions: zero slope from both sides, matching curvature."""
    if not x_lower < x_star < x_upper:
        raise ValueError(f"ordering violated: {x_lower} < {x_star} < {x_upper} required")
    if models is None:
        models = region_models(params, _default_interval(params, (x_lower, x_upper)))
    return _residuals_scaled(x_lower, x_star, x_upper, params, models)[0]


def relative_residual_norm(x_lower, x_star, x_upper, params, models) -> float:
    """Sup-norm of the residuals, each divided by the size of the terms it cancels (floored at 1)."""
    r, scale = _residuals_scaled(x_lower, x_star, x_upper, params, models)
    return float(np.max(np.abs(r) / scale))


# -- solution object -----------------------------------------------------------

@dataclass(frozen=True)
class BandSolution:
    params: ModelParams
    x_lower: float
    x_star: float
    x_upper: float
    coeff_a: float
    coeff_b: float
    coeff_c: float
    coeff_d: float
    residual_norm: float
    models: RegionModels = field(repr=False, compare=False)
    iterations: int = 0
    method: str = ""
    alternatives: tuple = ()
    residual_floor: float = 0.0

    def lower_branch(self, x, order: int = 0):
        return _branch(self.models.minus, self.coeff_a, self.coeff_b, x, order)

    def upper_branch(self, x, order: int = 0):
        return _branch(self.models.plus, self.coeff_c, self.coeff_d, x, order)

    def __call__(self, x, order: int = 0):
        """Minimal cost ``J*`` (order 0) or its derivatives, vectorised over ``x``."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        below = x <= self.x_lower
        above = x >= self.x_upper
        low = (x > self.x_lower) & (x < self.x_star)
        high = (x >= self.x_star) & (x < self.x_upper)
        if np.any(below):
            if order == 0:
                out[below] = self.params.l_cost * (self.x_lower - x[below]) + self.lower_branch(self.x_lower)
            else:
                out[below] = -self.params.l_cost if order == 1 else 0.0
        if np.any(low):
            out[low] = self.lower_branch(x[low], order)
        if np.any(high):
            out[high] = self.upper_branch(x[high], order)
        if np.any(above):
            if order == 0:
                out[above] = self.params.u_cost * (x[above] - self.x_upper) + self.upper_branch(self.x_upper)
            else:
                out[above] = self.params.u_cost if order == 1 else 0.0
        return out if out.ndim else float(out)

    @property
    def width(self) -> float:
        return self.x_upper - self.x_lower

    def residual_vector(self) -> np.ndarray:
        return residuals(self.x_lower, self.x_star, self.x_upper, self.params, self.models)

    def barrier_residuals(self) -> np.ndarray:
        """Pasting residuals at both barriers (slope and curvature)."""
        p = self.params
        return np.array([
            self.lower_branch(self.x_lower, 1) + p.l_cost,
            self.lower_branch(self.x_lower, 2),
            self.upper_branch(self.x_upper, 1) - p.u_cost,
            self.upper_branch(self.x_upper, 2),
        ])

    def to_dict(self) -> dict:
        return {
            "x_lower": self.x_lower,
            "x_star": self.x_star,
            "x_upper": self.x_upper,
            "coeff_a": self.coeff_a,
            "coeff_b": self.coeff_b,
            "coeff_c": self.coeff_c,
            "coeff_d": self.coeff_d,
            "residual_norm": self.residual_norm,
            "residuals": self.residual_vector().tolist(),
            "barrier_residuals": self.barrier_residuals().tolist(),
            "residual_floor": self.residual_floor,
            "iterations": self.iterations,
            "method": self.method,
            "alternatives": [list(t) for t in self.alternatives],
            "models_interval": list(self.models.interval),
        }


def evaluate_cost(solution: BandSolution, x) -> tuple:
    """``(J*(x), J*'(x))``."""
    return solution(x, 0), solution(x, 1)


def from_barriers(params, x_lower, x_star, x_upper, models=None, coeffs=None, **extra) -> BandSolution:
    """Assemble a BandSolution; coefficients are recomputed unless given."""
    if models is None:
        models = region_models(params, _default_interval(params, (x_lower, x_upper)))
    if coeffs is None:
        a, b = coeffs_lower(x_lower, params, models.minus)
        c, d = coeffs_upper(x_upper, params, models.plus)
    else:
        a, b, c, d = coeffs
    res = relative_residual_norm(x_lower, x_star, x_upper, params, models)
    return BandSolution(params, float(x_lower), float(x_star), float(x_upper), a, b, c, d, res, models, **extra)


# -- numerics ----------------------------------------------------------------

def _window(params: ModelParams, config: SolverConfig) -> float:
    return config.window if config.window is not None else 8.0 * length_scale(params)


def _default_interval(params: ModelParams, span) -> tuple[float, float]:
    if params.is_abm:
        return (-math.inf, math.inf)
    pad = 5.0 * params.sigma / math.sqrt(2.0 * params.rho)
    return (min(span[0], 0.0) - pad, max(span[1], 0.0) + pad)


def _norm(r) -> float:
    r = np.asarray(r, dtype=float)
    return float(np.max(np.abs(r))) if np.all(np.isfinite(r)) else math.inf


def _safe(fun, x):
    try:
        with np.errstate(all="ignore"):
            r = np.asarray(fun(x), dtype=float)
    except (ArithmeticError, IntervalError, ValueError):
        return None
    return r if np.all(np.isfinite(r)) else None


def damped_newton(fun, x0, config: SolverConfig, project=None, scale=None):
    """Damped Newton with a central-difference Jacobian.

    ``scale(x)`` (optional) gives per-equation magnitudes; it is frozen at the
    current iterate for the Jacobian and the step-halving comparisons, so an
    iterate cannot look better merely because the scale grew.  Each step is
    halved (at most ``config.max_halvings`` times) until the scaled sup-norm
    decreases.  Once below ``newton_tol`` up to three more full steps are
    taken while each at least halves the residual.  Returns ``(x, scaled_residual, iterations, converged,
    projected)``; ``projected`` tells whether the last accepted iterate had to
    be pulled back into the feasible set.

    When no halved step improves, the iterate still counts as converged if
    every scaled residual is below what rounding the unknowns themselves can
    resolve, ``64 eps * |J| (1 + |x|)``.  Near-degenerate bands (a barrier
    close to the kink of the holding cost, say) sit on such a floor well
    above ``newton_tol``.
    """
    x = np.array(x0, dtype=float)
    r = _safe(fun, x)
    if r is None:
        return x, None, 0, False, False

    def current_scale(z):
        s = _safe(scale, z) if scale is not None else None
        return s if s is not None else np.ones_like(r)

    s = current_scale(x)
    norm = _norm(r / s)
    projected = False
    polished = 0
    for it in range(1, int(config.max_iters) + 1):
        polishing = norm < config.newton_tol
        if polishing and polished >= 3:
            return x, r / s, it - 1, True, projected
        n = x.size
        jac = np.empty((r.size, n))
        for j in range(n):
            h = config.fd_step * (1.0 + abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            fp, fm = _safe(fun, xp), _safe(fun, xm)
            if fp is None or fm is None:
                return x, r / s, it, False, projected
            jac[:, j] = (fp - fm) / (2.0 * h * s)
        try:
            step = -np.linalg.solve(jac, r / s)
        except np.linalg.LinAlgError:
            return x, r / s, it, False, projected
        if not np.all(np.isfinite(step)):
            return x, r / s, it, False, projected
        if polishing:
            # below tolerance: take full steps only while they still help
            polished += 1
            trial = x + step if project is None else project(x + step)
            rt = _safe(fun, trial)
            if rt is None or not _norm(rt / s) < 0.5 * norm:
                return x, r / s, it - 1, True, projected
            x, r = trial, rt
            s = current_scale(x)
            norm = _norm(r / s)
            continue
        t = config.damping
        for _ in range(int(config.max_halvings) + 1):
            trial = x + t * step
            was_projected = False
            if project is not None:
                projected_trial = project(trial)
                was_projected = not np.array_equal(projected_trial, trial)
                trial = projected_trial
            rt = _safe(fun, trial)
            if rt is not None and _norm(rt / s) < norm:
                x, r, projected = trial, rt, was_projected
                s = current_scale(x)
                norm = _norm(r / s)
                break
            t *= 0.5
        else:
            floor = 64.0 * np.finfo(float).eps * (np.abs(jac) @ (1.0 + np.abs(x)))
            ok = norm < config.newton_tol or bool(np.all(np.abs(r / s) <= floor))
            return x, r / s, it, ok, projected
    return x, r / s, int(config.max_iters), norm < config.newton_tol, projected


def _first_zero(fun, x0: float, x1: float, n: int):
    """First sign change of ``fun`` on (x0, x1] scanning from x0; None if absent."""
    xs = np.linspace(x0, x1, n)
    with np.errstate(all="ignore"):
        vs = np.asarray(fun(xs), dtype=float)
    finite = np.isfinite(vs)
    if not finite[0]:
        return None, xs, vs
    s0 = np.sign(vs[0])
    for i in range(1, n):
        if not finite[i]:
            return None, xs[:i], vs[:i]
        if np.sign(vs[i]) != s0:
            root = brentq(lambda t: float(fun(t)), xs[i - 1], xs[i], xtol=1e-14, rtol=1e-15, maxiter=200)
            return root, xs[: i + 1], vs[: i + 1]
    return None, xs, vs


@dataclass(frozen=True)
class _Shot:
    gap: float
    x_star: float | None
    x_upper: float | None


def _shoot(x_lower: float, params: ModelParams, models: RegionModels, x_end: float, n: int) -> _Shot:
    """Integrate the pasting conditions outward from a trial lower barrier.

    The lower branch is fixed by pasting at ``x_lower``; the switch point is
    its first zero of slope; the upper branch continues with matching slope
    and curvature there and the upper barrier is its next inflection.  The
    returned ``gap`` is the peak slope reached minus ``u_cost``: its sign
    change in ``x_lower`` brackets a solution.
    """
    try:
        with np.errstate(all="ignore"):
            a, b = coeffs_lower(x_lower, params, models.minus)
    except (ArithmeticError, IntervalError):
        return _Shot(math.nan, None, None)
    if not (math.isfinite(a) and math.isfinite(b)):
        return _Shot(math.nan, None, None)
    lower = models.minus

    def slope_lo(x):
        return _branch(lower, a, b, x, 1)

    try:
        x_star, xs, vs = _first_zero(slope_lo, x_lower, x_end, n)
    except (IntervalError, ValueError):
        return _Shot(math.nan, None, None)
    if x_star is None:
        peak = np.nanmax(vs) if vs.size else -params.l_cost
        return _Shot(float(peak) - params.u_cost, None, None)
    curv = float(_branch(lower, a, b, x_star, 2))
    if not curv > 0:
        return _Shot(-params.u_cost, x_star, None)
    upper = models.plus
    try:
        with np.errstate(all="ignore"):
            c, d = _pasting(upper, x_star, 0.0, curv)
        x_upper, xs, vs = _first_zero(lambda x: _branch(upper, c, d, x, 2), x_star, x_end, n)
    except (ArithmeticError, IntervalError, ValueError):
        return _Shot(math.nan, x_star, None)
    if x_upper is None:
        with np.errstate(all="ignore"):
            tail = float(_branch(upper, c, d, xs[-1], 1)) if xs.size else math.nan
        return _Shot(tail - params.u_cost, x_star, None)
    with np.errstate(all="ignore"):
        peak = float(_branch(upper, c, d, x_upper, 1))
    return _Shot(peak - params.u_cost, x_star, x_upper)


def _scan_brackets(params, models, window, config):
    """Sign changes of the shooting gap over a grid of trial lower barriers."""
    grid = -window * (1.0 - np.linspace(0.0, 1.0, int(config.scan_grid) + 1)[:-1]) - 1e-9 * window
    grid = np.append(grid, -1e-6 * window)
    shots = [(xl, _shoot(xl, params, models, window, config.shot_grid)) for xl in grid]
    brackets = []
    for (x0, s0), (x1, s1) in zip(shots, shots[1:]):
        if math.isfinite(s0.gap) and math.isfinite(s1.gap) and np.sign(s0.gap) != np.sign(s1.gap):
            brackets.append((x0, s0, x1, s1))
    return brackets


def _refine_bracket(params, models, window, config, x0, x1):
    """Bisect the shooting gap on a bracket until a full shot is available."""
    def gap(x):
        return _shoot(x, params, models, window, config.shot_grid)

    g0 = gap(x0).gap
    best = None
    for _ in range(60):
        mid = 0.5 * (x0 + x1)
        shot = gap(mid)
        if shot.x_upper is not None and shot.x_star is not None:
            if best is None or abs(shot.gap) < abs(best[1].gap):
                best = (mid, shot)
            if abs(shot.gap) < 1e-3 * params.u_cost:
                break
        if not math.isfinite(shot.gap):
            break
        if np.sign(shot.gap) == np.sign(g0):
            x0, g0 = mid, shot.gap
        else:
            x1 = mid
        if abs(x1 - x0) < 1e-13 * (1 + abs(x0)):
            break
    return best


def _projector(eps):
    def project(z):
        xl, xs, xu = z
        lo, hi = xl + eps, xu - eps
        if lo >= hi:
            return z
        return np.array([xl, min(max(xs, lo), hi), xu])
    return project


def _check_feasible(params):
    report = feasibility_check(params)
    if not report.passed:
        raise FeasibilityError(report.violations)


def _models_for(params, window):
    return region_models(params, _default_interval(params, (-window, window)))


def _candidates_by_shooting(params, models, window, config, newton_fun):
    found = []
    for x0, _, x1, _ in _scan_brackets(params, models, window, config):
        best = _refine_bracket(params, models, window, config, x0, x1)
        if best is None:
            continue
        xl, shot = best
        found.append(newton_fun(np.array([xl, shot.x_star, shot.x_upper])))
    return found


def _validate(sol: BandSolution | None, config) -> bool:
    return (
        sol is not None
        and sol.x_lower < sol.x_star < sol.x_upper
        and sol.x_lower < 0 < sol.x_upper
        and sol.residual_norm < max(config.newton_tol, sol.residual_floor)
    )


def _pick(candidates, config, what):
    good = [c for c in candidates if _validate(c, config)]
    if not good:
        if any(c is not None for c in candidates):
            best = min((c for c in candidates if c is not None), key=lambda c: c.residual_norm)
            raise ConvergenceError(
                f"{what}: Newton did not converge (best residual {best.residual_norm:.3e} at "
                f"x_lower={best.x_lower:.6g}, x_star={best.x_star:.6g}, x_upper={best.x_upper:.6g})"
            )
        raise NoBandError(f"{what}: no band in scan window")
    # distinct roots only
    unique = []
    for c in sorted(good, key=lambda c: float(c(0.0))):
        if not any(abs(c.x_lower - u.x_lower) + abs(c.x_upper - u.x_upper) < 1e-7 for u in unique):
            unique.append(c)
    chosen = unique[0]
    if len(unique) > 1:
        log.warning("%s: %d distinct bands found; returning the cheapest", what, len(unique))
        chosen = replace(chosen, alternatives=tuple((u.x_lower, u.x_star, u.x_upper) for u in unique[1:]))
    return chosen


# -- public solvers ------------------------------------------------------------

def solve_classical(params: ModelParams, config: SolverConfig | None = None) -> BandSolution:
    """Band for the unambiguous problem (``kappa == 0``).

    Damped 2-D Newton on (x_lower, x_upper) with (A, B) eliminated through the
    lower pasting conditions; the switch point is the minimiser of the cost.
    """
    config = config or SolverConfig()
    if params.kappa != 0:
        raise ValueError("solve_classical needs kappa == 0")
    _check_feasible(params)
    window = _window(params, config)
    for _ in range(4):
        models = _models_for(params, window)
        try:
            return _solve_classical(params, models, window, config)
        except IntervalError:
            window *= 2.0
    raise ConvergenceError("classical solve kept leaving the fundamental-pair interval")


def _solve_classical(params, models, window, config):
    cost = models.minus

    def fun(z):
        xl, xu = z
        a, b = coeffs_lower(xl, params, cost)
        return np.array([_branch(cost, a, b, xu, 1) - params.u_cost, _branch(cost, a, b, xu, 2)])

    def scale(z):
        xl, xu = z
        a, b = coeffs_lower(xl, params, cost)
        return np.maximum(1.0, [_terms(cost, a, b, xu, 1) + params.u_cost, _terms(cost, a, b, xu, 2)])

    def newton(z):
        z2, r, its, ok, _ = damped_newton(fun, z[[0, 2]], config, scale=scale)
        if r is None or not np.all(np.isfinite(r)):
            return None
        xl, xu = z2
        if not xl < xu:
            return None
        a, b = coeffs_lower(xl, params, cost)
        xs = _argmin(lambda x: _branch(cost, a, b, x, 1), xl, xu)
        if xs is None:
            return None
        sol = from_barriers(params, xl, xs, xu, models, coeffs=(a, b, a, b), iterations=its, method="classical")
        # the switch-point residuals vanish by construction; report the pasting ones
        norm = max(_norm(r), sol.residual_norm)
        return replace(sol, residual_norm=norm, residual_floor=norm * 1.000001 if ok else 0.0)

    return _pick(_candidates_by_shooting(params, models, window, config, newton), config, "classical solve")


def _argmin(slope, lo, hi):
    try:
        f_lo, f_hi = float(slope(lo)), float(slope(hi))
    except (ArithmeticError, IntervalError):
        return None
    if not (f_lo < 0 < f_hi):
        return None
    return brentq(lambda t: float(slope(t)), lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def solve_band(
    params: ModelParams,
    config: SolverConfig | None = None,
    initial_guess: tuple[float, float, float] | None = None,
) -> BandSolution:
    """Solve the three switch-point equations for ``(x_lower, x_star, x_upper)``.

    The starting point is ``initial_guess`` if given, otherwise the band of
    the same problem without ambiguity.  If Newton fails from there, a
    shooting scan over the lower barrier supplies fresh starting points; when
    several distinct bands are found the one with the smallest ``J*(0)`` is
    returned and the others are listed in ``alternatives``.
    """
    config = config or SolverConfig()
    _check_feasible(params)
    window = _window(params, config)
    last_error: SolverError | None = None
    for _ in range(4):
        models = _models_for(params, window)
        try:
            return _solve_band(params, models, window, config, initial_guess)
        except IntervalError:
            window *= 2.0
        except NoBandError as exc:
            last_error = exc
            window *= 2.0
    raise last_error or ConvergenceError("band solve kept leaving the fundamental-pair interval")


def _solve_band(params, models, window, config, initial_guess):
    project = _projector(config.ordering_eps)

    def fun(z):
        xl, xs, xu = z
        if not xl < xs < xu:
            return np.full(3, np.inf)
        return _residuals_scaled(xl, xs, xu, params, models)[0]

    def scale(z):
        return _residuals_scaled(*z, params, models)[1]

    def newton(z0):
        z, r, its, ok, projected = damped_newton(fun, z0, config, project, scale)
        if r is None or projected or not np.all(np.isfinite(r)):
            return None
        xl, xs, xu = z
        # an unconverged iterate is kept (without floor credit) so failures report their residual
        return from_barriers(
            params, xl, xs, xu, models, iterations=its, method="newton",
            residual_floor=_norm(r) * 1.000001 if ok else 0.0,
        )

    if initial_guess is None:
        try:
            base = solve_classical(params.with_(kappa=0.0), config)
            initial_guess = (base.x_lower, base.x_star, base.x_upper)
        except SolverError as exc:
            log.info("classical start failed (%s); scanning", exc)
    if initial_guess is not None:
        sol = newton(np.array(initial_guess, dtype=float))
        if _validate(sol, config):
            return sol
        log.info("Newton from %s failed; falling back to the shooting scan", initial_guess)
    return _pick(_candidates_by_shooting(params, models, window, config, newton), config, "band solve")
