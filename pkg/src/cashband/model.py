"""Model primitives for two-sided cash management under drift ambiguity.

The uncontrolled cash balance follows either an arithmetic Brownian motion
(constant drift ``alpha``) or a mean-reverting Ornstein-Uhlenbeck process
(drift ``-eta * x``).  Ambiguity of size ``kappa`` shifts the drift by
``-kappa*sigma`` (``DriftSign.MINUS``) or ``+kappa*sigma`` (``DriftSign.PLUS``).

Everything in this module is a pure function of its inputs and every returned
object is immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

import numpy as np
from scipy.integrate import odeint
from scipy.interpolate import BPoly


class IntervalError(ValueError):
    """Raised when a numerically constructed object is evaluated off its grid."""


class ConstructionError(RuntimeError):
    """Numerical construction of a fundamental solution failed."""


@dataclass(frozen=True)
class ABM:
    alpha: float = 0.0

    kind = "abm"


@dataclass(frozen=True)
class OU:
    eta: float

    kind = "ou"

    def __post_init__(self):
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"OU mean-reversion speed must be positive, got {self.eta}")


DiffusionSpec = Union[ABM, OU]


class DriftSign(Enum):
    """Which constant density generator is active.

    MINUS means effective drift ``alpha - kappa*sigma`` and governs the
    region below the switch point; PLUS means ``alpha + kappa*sigma`` and
    governs the region from the switch point up to the upper barrier.
    """

    MINUS = -1
    PLUS = 1

    @property
    def other(self) -> "DriftSign":
        return DriftSign.PLUS if self is DriftSign.MINUS else DriftSign.MINUS


@dataclass(frozen=True)
class ModelParams:
    rho: float
    diffusion: DiffusionSpec
    sigma: float
    kappa: float
    c_neg: float
    c_pos: float
    l_cost: float
    u_cost: float

    def __post_init__(self):
        for name in ("rho", "sigma", "kappa", "c_neg", "c_pos", "l_cost", "u_cost"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite real, got {value!r}")
        if not isinstance(self.diffusion, (ABM, OU)):
            raise ValueError(f"unsupported diffusion {self.diffusion!r}")
        if isinstance(self.diffusion, ABM) and not math.isfinite(self.diffusion.alpha):
            raise ValueError("drift alpha must be finite")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        # sigma == 0 is allowed only for degenerate deterministic simulations
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        for name in ("c_neg", "c_pos", "l_cost", "u_cost"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def is_abm(self) -> bool:
        return isinstance(self.diffusion, ABM)

    @property
    def alpha(self) -> float:
        """Reference drift at x=0 (ABM drift, 0 for OU)."""
        return self.diffusion.alpha if self.is_abm else 0.0

    def shift(self, sign: DriftSign) -> float:
        """Constant drift shift ``±kappa*sigma`` induced by the generator."""
        return sign.value * self.kappa * self.sigma

    def drift(self, x, sign: DriftSign):
        """Effective drift at state ``x`` under the constant generator ``sign``."""
        if self.is_abm:
            return self.diffusion.alpha + self.shift(sign) + 0.0 * np.asarray(x, dtype=float)
        return -self.diffusion.eta * np.asarray(x, dtype=float) + self.shift(sign)

    def mirrored(self) -> "ModelParams":
        """Parameters of the reflected problem for ``-X``.

        Swaps the roles of the lower and upper sides: (alpha, c_neg, c_pos,
        l_cost, u_cost) -> (-alpha, c_pos, c_neg, u_cost, l_cost).
        """
        diffusion = ABM(-self.diffusion.alpha) if self.is_abm else self.diffusion
        return replace(
            self,
            diffusion=diffusion,
            c_neg=self.c_pos,
            c_pos=self.c_neg,
            l_cost=self.u_cost,
            u_cost=self.l_cost,
        )

    def with_(self, **changes) -> "ModelParams":
        """Copy with some fields replaced; ``alpha``/``eta`` address the diffusion."""
        if "alpha" in changes:
            alpha = changes.pop("alpha")
            if not self.is_abm:
                raise ValueError("alpha only applies to the ABM diffusion")
            changes["diffusion"] = ABM(float(alpha))
        if "eta" in changes:
            eta = changes.pop("eta")
            if self.is_abm:
                raise ValueError("eta only applies to the OU diffusion")
            changes["diffusion"] = OU(float(eta))
        return replace(self, **changes)


def holding_cost(x, params: ModelParams):
    """Instantaneous holding cost: ``c_pos*x`` for x >= 0, ``c_neg*|x|`` below."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, params.c_pos * x, -params.c_neg * x)
    return out if out.ndim else float(out)


def holding_cost_slope(x, params: ModelParams):
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, params.c_pos, -params.c_neg)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FeasibilityReport:
    passed: bool
    violations: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.passed


def _decay_rate(params: ModelParams) -> float:
    return params.rho if params.is_abm else params.rho + params.diffusion.eta


def feasibility_check(params: ModelParams) -> FeasibilityReport:
    """Cost feasibility: control must not be dearer than perpetual holding.

    ABM needs ``c_neg >= rho*l_cost`` and ``c_pos >= rho*u_cost``; OU replaces
    ``rho`` by ``rho + eta``.  The affine-slope form ``l_cost <= c_neg*a`` and
    ``u_cost <= c_pos*a`` is checked as well (it is the same inequality
    written through the slope of the discounted expected state).
    """
    k = _decay_rate(params)
    label = "rho" if params.is_abm else "(rho+eta)"
    violations = []
    if params.c_neg < k * params.l_cost:
        violations.append(f"c_neg >= {label}*l_cost violated: {params.c_neg:g} < {k * params.l_cost:g}")
    if params.c_pos < k * params.u_cost:
        violations.append(f"c_pos >= {label}*u_cost violated: {params.c_pos:g} < {k * params.u_cost:g}")
    a_minus = affine_coeffs(params, DriftSign.MINUS).a
    a_plus = affine_coeffs(params, DriftSign.PLUS).a
    if params.l_cost > params.c_neg * a_minus * (1 + 1e-12):
        violations.append("l_cost <= c_neg*a_minus violated")
    if params.u_cost > params.c_pos * a_plus * (1 + 1e-12):
        violations.append("u_cost <= c_pos*a_plus violated")
    return FeasibilityReport(not violations, tuple(violations))


def quadratic_roots(params: ModelParams, sign: DriftSign) -> tuple[float, float]:
    """Positive and negative roots of ``sigma^2/2 chi^2 + m chi - rho = 0``.

    ``m = alpha ± kappa*sigma``.  Only defined for the ABM diffusion.
    """
    if not params.is_abm:
        raise ValueError("characteristic roots are only defined for the ABM diffusion")
    if params.sigma <= 0:
        raise ValueError("characteristic roots need sigma > 0")
    half_s2 = 0.5 * params.sigma**2
    m = params.diffusion.alpha + params.shift(sign)
    disc = math.sqrt(m * m + 4.0 * half_s2 * params.rho)
    # cancellation-free pair: one root from the formula, the other via Vieta
    if m >= 0:
        gamma = (-m - disc) / (2.0 * half_s2)
        beta = -params.rho / (half_s2 * gamma)
    else:
        beta = (-m + disc) / (2.0 * half_s2)
        gamma = -params.rho / (half_s2 * beta)
    return beta, gamma


@dataclass(frozen=True)
class AffineCoeffs:
    """``f(x) = a*x + b``: discounted expected integral of the uncontrolled state."""

    a: float
    b: float

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        if order == 0:
            out = self.a * x + self.b
        elif order == 1:
            out = np.full_like(x, self.a)
        else:
            out = np.zeros_like(x)
        return out if out.ndim else float(out)


def affine_coeffs(params: ModelParams, sign: DriftSign) -> AffineCoeffs:
    shift = params.shift(sign)
    if params.is_abm:
        rho = params.rho
        return AffineCoeffs(1.0 / rho, (params.diffusion.alpha + shift) / rho**2)
    eta = params.diffusion.eta
    mean = shift / eta
    return AffineCoeffs(1.0 / (params.rho + eta), mean / params.rho - mean / (params.rho + eta))


class FundamentalPair:
    """Increasing/decreasing solutions of ``sigma^2/2 phi'' + m(x) phi' - rho phi = 0``.

    Both are normalised to 1 at the origin.  ``increasing(x, order)`` and
    ``decreasing(x, order)`` return the value (order 0) or the first/second
    derivative.
    """

    interval: tuple[float, float]

    def increasing(self, x, order: int = 0):
        raise NotImplementedError

    def decreasing(self, x, order: int = 0):
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialPair(FundamentalPair):
    """ABM pair ``exp(beta x)``, ``exp(gamma x)``; valid on the whole line."""

    beta: float
    gamma: float
    interval: tuple[float, float] = (-math.inf, math.inf)

    def increasing(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        out = self.beta**order * np.exp(self.beta * x)
        return out if out.ndim else float(out)

    def decreasing(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        out = self.gamma**order * np.exp(self.gamma * x)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class NumericalPair(FundamentalPair):
    """Fundamental pair for a drift ``-eta*x + shift`` built by ODE integration.

    Each solution is integrated as the first-order system (phi, phi') in the
    direction in which it grows, starting far out where it is recessive, so
    that the unwanted solution decays along the integration.  Values are
    tabulated on a node grid and joined by quintic Hermite pieces matching
    phi, phi' and phi''; the second derivative returned is the ODE's.
    """

    rho: float
    sigma: float
    eta: float
    shift: float
    interval: tuple[float, float]
    _inc: tuple = field(repr=False, compare=False, default=None)
    _dec: tuple = field(repr=False, compare=False, default=None)

    def _drift(self, x):
        return -self.eta * x + self.shift

    def _check(self, x):
        lo, hi = self.interval
        if np.any(x < lo - 1e-12 * (1 + abs(lo))) or np.any(x > hi + 1e-12 * (1 + abs(hi))):
            raise IntervalError(
                f"evaluation outside fundamental-pair interval [{lo:g}, {hi:g}]: "
                f"[{np.min(x):g}, {np.max(x):g}]"
            )

    def _eval(self, pieces, x, order):
        x = np.asarray(x, dtype=float)
        self._check(x)
        xc = np.clip(x, *self.interval)
        value, slope = pieces
        if order == 0:
            out = value(xc)
        elif order == 1:
            out = slope(xc)
        else:
            out = 2.0 * (self.rho * value(xc) - self._drift(xc) * slope(xc)) / self.sigma**2
        out = np.asarray(out, dtype=float)
        return out if out.ndim else float(out)

    def increasing(self, x, order: int = 0):
        return self._eval(self._inc, x, order)

    def decreasing(self, x, order: int = 0):
        return self._eval(self._dec, x, order)


def _quintic_hermite(x, f, d1, d2) -> BPoly:
    """Piecewise quintic matching value, slope and curvature at every node."""
    h = np.diff(x)
    c = np.empty((6, h.size))
    c[0] = f[:-1]
    c[1] = f[:-1] + h * d1[:-1] / 5
    c[2] = f[:-1] + 2 * h * d1[:-1] / 5 + h**2 * d2[:-1] / 20
    c[3] = f[1:] - 2 * h * d1[1:] / 5 + h**2 * d2[1:] / 20
    c[4] = f[1:] - h * d1[1:] / 5
    c[5] = f[1:]
    return BPoly(c, x)


# Extra room beyond the requested interval where the recessive start is
# placed; the unwanted solution is damped by roughly exp(-36) across it.
_OU_MARGIN_SIGMAS = 6.0


def _ou_pair(params: ModelParams, sign: DriftSign, interval, rtol: float) -> NumericalPair:
    eta, sigma, rho = params.diffusion.eta, params.sigma, params.rho
    shift = params.shift(sign)
    lo, hi = float(interval[0]), float(interval[1])
    margin = _OU_MARGIN_SIGMAS * sigma / math.sqrt(eta)
    mean = shift / eta
    start_lo = min(lo - margin, mean - margin)
    start_hi = max(hi + margin, mean + margin)
    two_over_s2 = 2.0 / sigma**2

    # node spacing: a small fraction of both the stationary spread and the
    # fastest log-growth rate phi'/phi ~ 2|drift|/sigma^2 on the interval
    fastest = 2.0 * max(abs(-eta * lo + shift), abs(-eta * hi + shift)) / sigma**2 + math.sqrt(2 * rho) / sigma
    h = min(0.05 * sigma / math.sqrt(2.0 * (rho + eta)), 0.1 / fastest)
    nodes = np.linspace(lo, hi, max(64, int(math.ceil((hi - lo) / h)) + 1))

    def rhs(y, x):
        return [y[1], two_over_s2 * (rho * y[0] - (-eta * x + shift) * y[1])]

    def integrate(x_from, grid):
        # far from the mean the recessive solution has phi'/phi ~ rho/drift
        slope = rho / (-eta * x_from + shift)
        ys, info = odeint(
            rhs, [1.0, slope], np.concatenate([[x_from], grid]),
            rtol=rtol, atol=1e-300, mxstep=1_000_000, full_output=True,
        )
        if info["message"] != "Integration successful.":
            raise ConstructionError(f"OU fundamental solution integration failed: {info['message']}")
        ys = ys[1:]
        if not np.all(np.isfinite(ys)):
            raise ConstructionError("OU fundamental solution overflowed; shrink the interval")
        return ys

    def pieces(ys, x):
        phi, dphi = ys[:, 0], ys[:, 1]
        d2 = two_over_s2 * (rho * phi - (-eta * x + shift) * dphi)
        at0 = float(np.interp(0.0, x, phi)) if x[0] < x[-1] else float(np.interp(0.0, x[::-1], phi[::-1]))
        return _quintic_hermite(x, phi, dphi, d2), at0

    inc, inc0 = pieces(integrate(start_lo, nodes), nodes)
    dec, dec0 = pieces(integrate(start_hi, nodes[::-1])[::-1], nodes)
    # normalise by the interpolant itself so phi(0) == 1 to rounding
    inc0, dec0 = float(inc(0.0)), float(dec(0.0))
    if not (math.isfinite(inc0) and math.isfinite(dec0)) or inc0 <= 0 or dec0 <= 0:
        raise ConstructionError(
            f"OU fundamental solution normalisation failed (phi_inc(0)={inc0}, phi_dec(0)={dec0})"
        )
    inc = BPoly(inc.c / inc0, inc.x)
    dec = BPoly(dec.c / dec0, dec.x)
    return NumericalPair(
        rho=rho, sigma=sigma, eta=eta, shift=shift, interval=(lo, hi),
        _inc=(inc, inc.derivative()), _dec=(dec, dec.derivative()),
    )


def fundamental_pair(
    params: ModelParams,
    sign: DriftSign,
    interval: tuple[float, float] = (-math.inf, math.inf),
    rtol: float = 1e-12,
) -> FundamentalPair:
    """Normalised increasing/decreasing solutions under the drift ``sign``.

    ABM gives closed-form exponentials valid everywhere.  OU needs a bounded
    ``interval`` containing 0 and integrates numerically.
    """
    lo, hi = interval
    if not lo <= 0 <= hi:
        raise ValueError(f"interval {interval} must contain 0")
    if params.is_abm:
        beta, gamma = quadratic_roots(params, sign)
        return ExponentialPair(beta, gamma)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("the OU fundamental pair needs a bounded interval")
    return _ou_pair(params, sign, interval, rtol)


@dataclass(frozen=True)
class PerpetualCost:
    """Discounted holding cost of the uncontrolled process under one generator.

    Below zero it is ``-c_neg*f(x) + e_hat*phi_inc(x)``, from zero upwards
    ``c_pos*f(x) + e_check*phi_dec(x)``.
    """

    sign: DriftSign
    e_hat: float
    e_check: float
    affine: AffineCoeffs
    pair: FundamentalPair
    params: ModelParams

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        neg = x < 0
        # evaluate each branch only where it applies to avoid exp overflow
        out = np.empty_like(x)
        if np.any(neg):
            xn = x[neg]
            out[neg] = -self.params.c_neg * self.affine(xn, order) + self.e_hat * self.pair.increasing(xn, order)
        if np.any(~neg):
            xp = x[~neg]
            out[~neg] = self.params.c_pos * self.affine(xp, order) + self.e_check * self.pair.decreasing(xp, order)
        return out if out.ndim else float(out)

    def ode_residual(self, x):
        """``sigma^2/2 R'' + m(x) R' - rho R + c(x)``; zero away from the origin."""
        p = self.params
        return (
            0.5 * p.sigma**2 * self(x, 2)
            + p.drift(x, self.sign) * self(x, 1)
            - p.rho * self(x)
            + holding_cost(x, p)
        )


def perpetual_cost(
    params: ModelParams,
    sign: DriftSign,
    pair: FundamentalPair | None = None,
) -> PerpetualCost:
    """Build the perpetual holding cost under the generator ``sign``.

    The constants on the exponential corrections come from continuity of the
    value and first derivative at the origin.
    """
    if pair is None:
        pair = fundamental_pair(params, sign)
    affine = affine_coeffs(params, sign)
    dinc0 = pair.increasing(0.0, 1)
    ddec0 = pair.decreasing(0.0, 1)
    denom = dinc0 - ddec0
    if not denom > 0:
        raise ArithmeticError(f"degenerate fundamental pair at 0: phi_inc'(0) - phi_dec'(0) = {denom}")
    total = params.c_pos + params.c_neg
    f0, df0 = affine.b, affine.a
    e_hat = total * (df0 - f0 * ddec0) / denom
    e_check = total * (df0 - f0 * dinc0) / denom
    return PerpetualCost(sign, e_hat, e_check, affine, pair, params)


def abm_perpetual_constants(params: ModelParams, sign: DriftSign) -> tuple[float, float]:
    """Closed-form ``(e_hat, e_check)`` for ABM written through the roots."""
    beta, gamma = quadratic_roots(params, sign)
    scale = (params.c_pos + params.c_neg) * params.sigma**2 / (2.0 * params.rho**2 * (beta - gamma))
    return scale * gamma**2, scale * beta**2


@dataclass(frozen=True)
class RegionModels:
    """The MINUS and PLUS perpetual costs (with their fundamental pairs)."""

    minus: PerpetualCost
    plus: PerpetualCost

    def __getitem__(self, sign: DriftSign) -> PerpetualCost:
        return self.minus if sign is DriftSign.MINUS else self.plus

    @property
    def interval(self) -> tuple[float, float]:
        return self.minus.pair.interval


def region_models(params: ModelParams, interval=(-math.inf, math.inf), rtol: float = 1e-12) -> RegionModels:
    """Perpetual costs for both generators.  With ``kappa == 0`` they are the same object."""
    minus = perpetual_cost(params, DriftSign.MINUS, fundamental_pair(params, DriftSign.MINUS, interval, rtol))
    if params.kappa == 0:
        plus = replace(minus, sign=DriftSign.PLUS)
    else:
        plus = perpetual_cost(params, DriftSign.PLUS, fundamental_pair(params, DriftSign.PLUS, interval, rtol))
    return RegionModels(minus, plus)


def length_scale(params: ModelParams) -> float:
    """Rough size of the uncontrolled excursions, used to size search windows."""
    if params.is_abm:
        diffusive = params.sigma / math.sqrt(2.0 * params.rho)
        drift = (abs(params.alpha) + params.kappa * params.sigma) / params.rho
    else:
        # mean reversion caps excursions at the stationary spread
        eta = params.diffusion.eta
        diffusive = params.sigma / math.sqrt(2.0 * (params.rho + eta))
        drift = params.kappa * params.sigma / eta
    return diffusive + drift
