"""Comparative statics: solve the band along one parameter axis.

Within each overlay the grid is walked in order and every solve starts from
the previous converged band; a failed warm start is retried cold.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .model import ModelParams, feasibility_check
from .solver import SolverConfig, SolverError, solve_band

log = logging.getLogger(__name__)

AXES = ("sigma", "kappa", "alpha", "eta", "c_pos", "c_neg", "l_cost", "u_cost")
BAND_PROBES = ("x_lower", "x_lower/2", "0", "x_upper/2", "x_upper")


@dataclass(frozen=True)
class SweepSpec:
    base: ModelParams
    axis: str
    grid: tuple[float, ...]
    overlays: tuple[tuple[str, float], ...] = ()
    probes: tuple[float, ...] | None = None  # absolute x values; None means the band-relative set
    warm_start: bool = True

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise ValueError("grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        overlays = tuple((str(k), float(v)) for k, v in self.overlays)
        for name, _ in overlays:
            if name not in AXES:
                raise ValueError(f"overlay parameter must be one of {AXES}, got {name!r}")
        object.__setattr__(self, "overlays", overlays)
        if self.probes is not None:
            object.__setattr__(self, "probes", tuple(float(x) for x in self.probes))

    def variants(self) -> list[ModelParams]:
        if not self.overlays:
            return [self.base]
        return [self.base.with_(**{name: value}) for name, value in self.overlays]

    def probe_names(self) -> list[str]:
        if self.probes is None:
            return [f"J({p})" for p in BAND_PROBES]
        return [f"J({x:.9g})" for x in self.probes]


@dataclass
class SweepRow:
    axis_value: float
    params: ModelParams
    x_lower: float = math.nan
    x_star: float = math.nan
    x_upper: float = math.nan
    probe_values: list = field(default_factory=list)
    converged: bool = False
    residual_norm: float = math.nan
    attempts: list = field(default_factory=list)  # ("warm"|"cold", outcome)
    solution: object = field(default=None, repr=False)

    @property
    def width(self) -> float:
        return self.x_upper - self.x_lower


def _probe_points(spec, sol):
    if spec.probes is not None:
        return list(spec.probes)
    return [sol.x_lower, sol.x_lower / 2, 0.0, sol.x_upper / 2, sol.x_upper]


def _solve_row(spec, params, value, config, guess):
    row = SweepRow(axis_value=value, params=params)
    feas = feasibility_check(params)
    if not feas:
        row.attempts.append(("feasibility", "; ".join(feas.violations)))
        row.probe_values = [math.nan] * len(spec.probe_names())
        return row
    starts = [("warm", guess), ("cold", None)] if guess is not None else [("cold", None)]
    for label, start in starts:
        try:
            sol = solve_band(params, config, initial_guess=start)
        except SolverError as exc:
            row.attempts.append((label, str(exc)))
            continue
        row.attempts.append((label, "ok"))
        row.x_lower, row.x_star, row.x_upper = sol.x_lower, sol.x_star, sol.x_upper
        row.residual_norm = sol.residual_norm
        row.converged = True
        row.solution = sol
        row.probe_values = [float(sol(x)) for x in _probe_points(spec, sol)]
        return row
    row.probe_values = [math.nan] * len(spec.probe_names())
    return row


def _walk(spec, variant, config):
    rows, guess = [], None
    for value in spec.grid:
        params = variant.with_(**{spec.axis: value})
        row = _solve_row(spec, params, value, config, guess if spec.warm_start else None)
        if row.converged:
            guess = (row.x_lower, row.x_star, row.x_upper)
        log.info("%s=%g: %s", spec.axis, value, "ok" if row.converged else row.attempts[-1][1])
        rows.append(row)
    return rows


def run_sweep(spec: SweepSpec, config: SolverConfig | None = None, threads: int | None = None) -> list[SweepRow]:
    """One row per (overlay, grid point), overlay-major, grid order within each."""
    config = config or SolverConfig()
    variants = spec.variants()
    workers = max(1, min(len(variants), int(threads or os.cpu_count() or 1)))
    if workers == 1:
        blocks = [_walk(spec, v, config) for v in variants]
    else:
        with ThreadPoolExecutor(workers) as pool:
            blocks = list(pool.map(lambda v: _walk(spec, v, config), variants))
    return [row for block in blocks for row in block]


def _fmt(x) -> str:
    return "%.9g" % x


def header(spec: SweepSpec) -> list[str]:
    return [
        "axis_value", "sigma", "kappa", "alpha_or_eta", "c_neg", "c_pos", "l_cost", "u_cost",
        "x_lower", "x_star", "x_upper", *spec.probe_names(), "converged", "residual_norm",
    ]


def to_csv(spec: SweepSpec, rows, path=None) -> str:
    """Render rows as CSV (9 significant digits); also write to ``path`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header(spec))
    for r in rows:
        p = r.params
        drift = p.alpha if p.is_abm else p.diffusion.eta
        w.writerow([
            _fmt(r.axis_value), _fmt(p.sigma), _fmt(p.kappa), _fmt(drift), _fmt(p.c_neg), _fmt(p.c_pos),
            _fmt(p.l_cost), _fmt(p.u_cost), _fmt(r.x_lower), _fmt(r.x_star), _fmt(r.x_upper),
            *(_fmt(v) for v in r.probe_values), "true" if r.converged else "false", _fmt(r.residual_norm),
        ])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
