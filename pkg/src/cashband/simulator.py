"""Monte Carlo for the band-controlled cash process under a chosen prior.

Paths are projected Euler: after each step the state is clamped to the band
and the clamp size is booked as the control increment.  Every path draws its
normals from its own Philox stream (key ``seed``, top counter word = path
index), so results do not depend on how paths are split across threads.
All scenarios and starting points in one call share those normals.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .model import ModelParams, perpetual_cost, affine_coeffs, DriftSign

SCENARIOS = ("switching", "minus", "zero", "plus")
_CODES = {"switching": (True, 0.0), "minus": (False, -1.0), "zero": (False, 0.0), "plus": (False, 1.0)}
_CHUNK = 1 << 17  # normals drawn per call
_BLOCK = 64  # paths per worker task


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 10_000
    dt: float = 1e-3
    horizon: float = 100.0
    seed: int = 12345
    x0: float = 0.0
    rng_dt: float | None = None  # resolution of the random stream; coarser steps add up its normals

    def __post_init__(self):
        if int(self.n_paths) < 2:
            raise ValueError("n_paths must be at least 2")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if not math.isfinite(self.x0):
            raise ValueError("x0 must be finite")
        if self.rng_dt is not None:
            k = self.dt / self.rng_dt
            if not (self.rng_dt > 0 and abs(k - round(k)) < 1e-9 * k and round(k) >= 1):
                raise ValueError("dt must be an integer multiple of rng_dt")

    def check(self, params: ModelParams) -> None:
        if not self.dt < 1.0 / params.rho:
            raise ValueError(f"dt={self.dt} must be below 1/rho={1.0 / params.rho:g}")
        if not self.horizon >= 10.0 / params.rho:
            raise ValueError(f"horizon={self.horizon} must be at least 10/rho={10.0 / params.rho:g}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9))

    @property
    def substeps(self) -> int:
        return 1 if self.rng_dt is None else int(round(self.dt / self.rng_dt))


@dataclass(frozen=True)
class SimEstimate:
    mean_cost: float
    std_error: float
    mean_L_total: float
    mean_U_total: float
    truncation_bound: float
    paths_used: int
    x0: float = 0.0
    scenario: str = "switching"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class PathRecord:
    t: np.ndarray
    x: np.ndarray
    dL: np.ndarray
    dU: np.ndarray

    def to_csv(self, path) -> None:
        data = np.column_stack([self.t, self.x, self.dL, self.dU])
        np.savetxt(path, data, delimiter=",", header="t,x,dL,dU", comments="", fmt="%.17g")


@dataclass(frozen=True)
class _Dynamics:
    """Drift ``mu0 + s*ks - eta*x``, band, and integrand slopes, as plain floats."""

    mu0: float
    ks: float
    eta: float
    sigma: float
    x_lower: float
    x_star: float
    x_upper: float
    c_neg: float
    c_pos: float
    l_cost: float
    u_cost: float
    rho: float

    @classmethod
    def build(cls, params, x_lower, x_star, x_upper, integrand="holding"):
        c_neg, c_pos = (params.c_neg, params.c_pos) if integrand == "holding" else (-1.0, 1.0)
        return cls(
            mu0=params.alpha if params.is_abm else 0.0,
            ks=params.kappa * params.sigma,
            eta=0.0 if params.is_abm else params.diffusion.eta,
            sigma=params.sigma,
            x_lower=x_lower,
            x_star=x_star,
            x_upper=x_upper,
            c_neg=c_neg,
            c_pos=c_pos,
            l_cost=params.l_cost,
            u_cost=params.u_cost,
            rho=params.rho,
        )


@numba.njit(cache=True)
def _step(x, w, sgn, mu0, ks, eta, sig_sqdt, dt, lo, hi):
    y = x + (mu0 + sgn * ks - eta * x) * dt + sig_sqdt * w
    dl = 0.0
    du = 0.0
    if y < lo:
        dl = lo - y
        y = lo
    elif y > hi:
        du = y - hi
        y = hi
    return y, dl, du


@numba.njit(cache=True, nogil=True)
def _advance(z, k, x, acc, lt, ut, disc0, switch, sign, mu0, ks, eta, sig_sqdt, dt,
             lo, xs, hi, cn, cp, lc, uc, decay, check):
    """Step every (scenario, x0) combo of one path through the normals in ``z``.

    Combos sit in the inner loop so their recursions overlap.  With ``check``
    returns the first step with a non-finite state (or -1); without it the
    per-step test is skipped, which is much faster.
    """
    n_combo = x.size
    n = z.size // k
    inv = 1.0 / math.sqrt(k)
    d = disc0
    for i in range(n):
        if k == 1:
            w = z[i]
        else:
            w = 0.0
            for j in range(i * k, (i + 1) * k):
                w += z[j]
            w *= inv
        bad = False
        for c in range(n_combo):
            X = x[c]
            h = cp * X if X >= 0.0 else -cn * X
            if switch[c]:
                sgn = -1.0 if X < xs else 1.0
            else:
                sgn = sign[c]
            X, dl, du = _step(X, w, sgn, mu0, ks, eta, sig_sqdt, dt, lo, hi)
            acc[c] += d * (h * dt + lc * dl + uc * du)
            lt[c] += dl
            ut[c] += du
            x[c] = X
            if check:
                bad |= not math.isfinite(X)
        if bad:
            return i
        d *= decay
    return -1


@numba.njit(cache=True)
def _record(z, k, x0, switch, sign, mu0, ks, eta, sig_sqdt, dt, lo, xs, hi, xs_out, dl_out, du_out):
    n = z.size // k
    inv = 1.0 / math.sqrt(k)
    X = x0
    for i in range(n):
        if k == 1:
            w = z[i]
        else:
            w = 0.0
            for j in range(i * k, (i + 1) * k):
                w += z[j]
            w *= inv
        sgn = (-1.0 if X < xs else 1.0) if switch else sign
        X, dl, du = _step(X, w, sgn, mu0, ks, eta, sig_sqdt, dt, lo, hi)
        xs_out[i] = X
        dl_out[i] = dl
        du_out[i] = du


def _stream(seed: int, path_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(path_index)]))


def _initial(x0, dyn: _Dynamics):
    """State after the time-0 lump and its cost."""
    if x0 < dyn.x_lower:
        return dyn.x_lower, dyn.l_cost * (dyn.x_lower - x0), dyn.x_lower - x0, 0.0
    if x0 > dyn.x_upper:
        return dyn.x_upper, dyn.u_cost * (x0 - dyn.x_upper), 0.0, x0 - dyn.x_upper
    return x0, 0.0, 0.0, 0.0


def _run(dyn: _Dynamics, config: SimConfig, combos, threads=None):
    """Per-path totals, arrays of shape (n_paths, n_combos): cost, L, U, terminal state."""
    n_paths, n_steps, k = int(config.n_paths), config.n_steps, config.substeps
    dt = config.dt
    sig_sqdt = dyn.sigma * math.sqrt(dt)
    decay = math.exp(-dyn.rho * dt)
    switch = np.array([_CODES[s][0] for s, _ in combos])
    sign = np.array([_CODES[s][1] for s, _ in combos])
    starts = [_initial(x0, dyn) for _, x0 in combos]
    cost = np.empty((n_paths, len(combos)))
    ltot = np.empty_like(cost)
    utot = np.empty_like(cost)
    xend = np.empty_like(cost)
    steps_per_chunk = max(1, _CHUNK // k)

    def block(lo_hi):
        z = np.empty(steps_per_chunk * k)
        for p in range(*lo_hi):
            gen = _stream(config.seed, p)
            x = np.array([s[0] for s in starts])
            acc = np.array([s[1] for s in starts])
            lt = np.array([s[2] for s in starts])
            ut = np.array([s[3] for s in starts])
            done = 0
            while done < n_steps:
                m = min(steps_per_chunk, n_steps - done)
                zc = gen.standard_normal(out=z[: m * k])
                saved = (x.copy(), acc.copy(), lt.copy(), ut.copy())
                args = (zc, k, x, acc, lt, ut, decay**done, switch, sign, dyn.mu0, dyn.ks, dyn.eta,
                        sig_sqdt, dt, dyn.x_lower, dyn.x_star, dyn.x_upper, dyn.c_neg, dyn.c_pos,
                        dyn.l_cost, dyn.u_cost, decay)
                _advance(*args, False)
                # non-finite states leave the running cost non-finite; replay the chunk to locate them
                if not (np.all(np.isfinite(acc)) and np.all(np.isfinite(x))):
                    for arr, old in zip((x, acc, lt, ut), saved):
                        arr[:] = old
                    bad = _advance(*args, True)
                    raise SimulationError(f"non-finite state on path {p} at step {done + max(bad, 0)}")
                done += m
            cost[p], ltot[p], utot[p], xend[p] = acc, lt, ut, x

    size = _BLOCK
    blocks = [(i, min(i + size, n_paths)) for i in range(0, n_paths, size)]
    workers = max(1, int(threads or os.cpu_count() or 1))
    if workers == 1:
        for b in blocks:
            block(b)
    else:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(block, blocks))
    return cost, ltot, utot, xend


def _estimates(dyn, config, combos, tail, threads):
    cost, ltot, utot, xend = _run(dyn, config, combos, threads)
    n = cost.shape[0]
    out = {}
    for j, (scenario, x0) in enumerate(combos):
        out[(scenario, x0)] = SimEstimate(
            mean_cost=float(np.mean(cost[:, j])),
            std_error=float(np.std(cost[:, j], ddof=1) / math.sqrt(n)),
            mean_L_total=float(np.mean(ltot[:, j])),
            mean_U_total=float(np.mean(utot[:, j])),
            truncation_bound=float(tail(xend[:, j])),
            paths_used=n,
            x0=float(x0),
            scenario=scenario,
        )
    return out


def _band_dynamics(solution, config, x0s):
    params = solution.params
    config.check(params)
    for x0 in x0s:
        if not solution.x_lower - 10 <= x0 <= solution.x_upper + 10:
            raise ValueError(f"x0={x0} is more than 10 outside the band")
    return _Dynamics.build(params, solution.x_lower, solution.x_star, solution.x_upper)


def simulate_costs(solution, config: SimConfig, x0s=None, scenarios=("switching",), threads=None):
    """Estimates for every (scenario, x0) pair, all driven by the same normals.

    Returns a dict keyed by ``(scenario, x0)``.
    """
    x0s = [config.x0] if x0s is None else [float(v) for v in x0s]
    for s in scenarios:
        if s not in _CODES:
            raise ValueError(f"unknown scenario {s!r}; expected one of {SCENARIOS}")
    dyn = _band_dynamics(solution, config, x0s)
    peak = max(solution(solution.x_lower), solution(solution.x_upper))
    bound = math.exp(-dyn.rho * config.n_steps * config.dt) * peak
    combos = [(s, x0) for s in scenarios for x0 in x0s]
    return _estimates(dyn, config, combos, lambda _: bound, threads)


def simulate_cost(solution, config: SimConfig, scenario: str = "switching", threads=None) -> SimEstimate:
    """Discounted cost from ``config.x0`` under the band policy of ``solution``.

    ``scenario`` picks the prior: ``"switching"`` is the worst case (drift
    shifted down below ``x_star`` and up from it); ``"minus"``, ``"zero"`` and
    ``"plus"`` hold the shift constant.
    """
    return simulate_costs(solution, config, [config.x0], (scenario,), threads)[(scenario, config.x0)]


def simulate_uncontrolled(params: ModelParams, config: SimConfig, scenario="zero", integrand="holding",
                          threads=None) -> SimEstimate:
    """No barriers.  ``integrand="state"`` integrates ``X_t`` itself instead of the holding cost."""
    if scenario == "switching":
        raise ValueError("the switching prior needs a band")
    if integrand not in ("holding", "state"):
        raise ValueError("integrand must be 'holding' or 'state'")
    config.check(params)
    dyn = _Dynamics.build(params, -math.inf, 0.0, math.inf, integrand)
    sign = DriftSign.MINUS if scenario == "minus" else DriftSign.PLUS
    shifted = params if scenario != "zero" else params.with_(kappa=0.0)
    if integrand == "holding":
        value = perpetual_cost(shifted, sign) if shifted.is_abm else None
    else:
        value = affine_coeffs(shifted, sign)
    decay = math.exp(-params.rho * config.n_steps * config.dt)

    def tail(xend):
        if value is None:  # OU holding cost: crude linear bound
            return decay * np.mean(np.maximum(params.c_pos, params.c_neg) * (np.abs(xend) + 1.0)) / params.rho
        return decay * np.mean(np.abs(value(xend)))

    return _estimates(dyn, config, [(scenario, config.x0)], tail, threads)[(scenario, config.x0)]


def simulate_path(solution, config: SimConfig, path_index: int, scenario="switching") -> PathRecord:
    """One path from ``config.x0``; same normals as path ``path_index`` of the estimators.

    Row 0 holds the time-0 lump (if ``x0`` is outside the band).
    """
    dyn = _band_dynamics(solution, config, [config.x0])
    n, k = config.n_steps, config.substeps
    z = _stream(config.seed, path_index).standard_normal(n * k)
    x0, _, l0, u0 = _initial(config.x0, dyn)
    xs, dl, du = np.empty(n + 1), np.empty(n + 1), np.empty(n + 1)
    xs[0], dl[0], du[0] = x0, l0, u0
    switch, sign = _CODES[scenario]
    _record(z, k, x0, switch, sign, dyn.mu0, dyn.ks, dyn.eta, dyn.sigma * math.sqrt(config.dt), config.dt,
            dyn.x_lower, dyn.x_star, dyn.x_upper, xs[1:], dl[1:], du[1:])
    bad = np.flatnonzero(~np.isfinite(xs))
    if bad.size:
        raise SimulationError(f"non-finite state on path {path_index} at step {bad[0] - 1}")
    return PathRecord(t=np.arange(n + 1) * config.dt, x=xs, dL=dl, dU=du)
