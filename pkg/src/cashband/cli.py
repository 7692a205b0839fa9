"""Command line front end: ``cashband {solve,verify,simulate,sweep}``.

Exit codes: 0 ok, 1 verification failed (or simulation off by more than
3 standard errors), 2 bad input, 3 infeasible parameters, 4 no convergence,
5 sweep finished with failed rows.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .model import DriftSign, ModelParams, affine_coeffs, perpetual_cost, region_models
from .simulator import simulate_cost, simulate_uncontrolled
from .solver import (
    BandSolution,
    ConvergenceError,
    FeasibilityError,
    NoBandError,
    SolverError,
    from_barriers,
    solve_band,
)
from .sweep import run_sweep, to_csv
from .verifier import verify

log = logging.getLogger("cashband")

OK, VERIFY_FAILED, BAD_INPUT, INFEASIBLE, NO_CONVERGENCE, PARTIAL_SWEEP = range(6)


def model_to_dict(p: ModelParams) -> dict:
    out = {"rho": p.rho, "diffusion": "abm" if p.is_abm else "ou"}
    if p.is_abm:
        out["alpha"] = p.alpha
    else:
        out["eta"] = p.diffusion.eta
    out.update(sigma=p.sigma, kappa=p.kappa, c_neg=p.c_neg, c_pos=p.c_pos, l_cost=p.l_cost, u_cost=p.u_cost)
    return out


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.tol is not None:
        if not args.tol > 0:
            raise ConfigError("--tol must be positive")
        cfg = replace(cfg, solver=replace(cfg.solver, newton_tol=args.tol))
    if getattr(args, "seed", None) is not None and cfg.simulation is not None:
        sim = cfg.simulation
        try:
            cfg = replace(cfg, simulation=replace(sim, config=replace(sim.config, seed=args.seed)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def load_solution(path, params: ModelParams) -> BandSolution:
    """Rebuild a solution from a ``solve`` output file; stored coefficients are kept."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read solution {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    sol = doc.get("solution", doc) if isinstance(doc, dict) else None
    try:
        xl, xs, xu = (float(sol[k]) for k in ("x_lower", "x_star", "x_upper"))
        coeffs = None
        if all(k in sol for k in ("coeff_a", "coeff_b", "coeff_c", "coeff_d")):
            coeffs = tuple(float(sol[k]) for k in ("coeff_a", "coeff_b", "coeff_c", "coeff_d"))
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{path} does not hold a solution (need x_lower, x_star, x_upper)") from None
    if not (xl < xs < xu):
        raise ConfigError(f"{path}: barriers are not ordered")
    try:
        return from_barriers(params, xl, xs, xu, coeffs=coeffs)
    except (ArithmeticError, ValueError) as exc:
        raise ConfigError(f"{path}: cannot evaluate the solution: {exc}") from None


def _solution_json(cfg: RunConfig, sol: BandSolution) -> str:
    return json.dumps({"model": model_to_dict(cfg.model), "solution": sol.to_dict()}, indent=2)


def cmd_solve(args) -> int:
    cfg = _load(args)
    cfg.require("model")
    sol = solve_band(cfg.model, cfg.solver)
    _emit(_solution_json(cfg, sol), args.out)
    if args.grid_csv:
        x = np.linspace(sol.x_lower - 2, sol.x_upper + 2, args.grid_points)
        data = np.column_stack([x, sol(x), sol(x, 1)])
        np.savetxt(args.grid_csv, data, delimiter=",", header="x,J,dJ", comments="", fmt="%.9g")
    log.info("x_lower=%.9g x_star=%.9g x_upper=%.9g residual=%.2e", sol.x_lower, sol.x_star, sol.x_upper,
             sol.residual_norm)
    return OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    cfg.require("model")
    sol = load_solution(args.solution, cfg.model)
    report = verify(sol, tol=args.verify_tol)
    print(report.to_text())
    if args.out:
        _emit(report.to_json(), args.out)
    return OK if report.passed else VERIFY_FAILED


def _uncontrolled_value(params: ModelParams, scenario: str, integrand: str, x0: float) -> float:
    p = params.with_(kappa=0.0) if scenario == "zero" else params
    sign = DriftSign.MINUS if scenario == "minus" else DriftSign.PLUS
    if integrand == "state":
        return float(affine_coeffs(p, sign)(x0))
    if p.is_abm:
        return float(perpetual_cost(p, sign)(x0))
    span = 5 * p.sigma / math.sqrt(2 * p.rho)
    models = region_models(p, (min(x0, 0.0) - span, max(x0, 0.0) + span))
    return float(models[sign](x0))


def cmd_simulate(args) -> int:
    cfg = _load(args)
    cfg.require("model", "simulation")
    sim = cfg.simulation
    try:
        if sim.uncontrolled:
            est = simulate_uncontrolled(cfg.model, sim.config, sim.scenario, sim.integrand, threads=args.threads)
            analytic = _uncontrolled_value(cfg.model, sim.scenario, sim.integrand, sim.config.x0)
        else:
            sol = load_solution(args.solution, cfg.model) if args.solution else solve_band(cfg.model, cfg.solver)
            est = simulate_cost(sol, sim.config, sim.scenario, threads=args.threads)
            analytic = float(sol(sim.config.x0))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    z = (est.mean_cost - analytic) / est.std_error if est.std_error > 0 else (0.0 if est.mean_cost == analytic else math.inf)
    print(f"estimate   {est.mean_cost:.9g}")
    print(f"std_error  {est.std_error:.3g}")
    print(f"analytic   {analytic:.9g}")
    print(f"z          {z:.3f}")
    if args.out:
        _emit(json.dumps({**est.to_dict(), "analytic": analytic, "z": z}, indent=2), args.out)
    return OK if abs(z) <= 3 else VERIFY_FAILED


def cmd_sweep(args) -> int:
    cfg = _load(args)
    spec = cfg.sweep_spec()
    rows = run_sweep(spec, cfg.solver, threads=args.threads)
    _emit(to_csv(spec, rows), args.out)
    failed = [r for r in rows if not r.converged]
    for r in failed:
        log.warning("%s=%g failed: %s", spec.axis, r.axis_value, r.attempts[-1][1] if r.attempts else "?")
    return OK if not failed else PARTIAL_SWEEP


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cashband", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--threads", type=int, default=None, help="worker cap (default: all cores)")
        p.add_argument("--seed", type=int, default=None, help="override simulation.seed")
        p.add_argument("--tol", type=float, default=None, help="override solver.newton_tol")
        return p

    p = common(sub.add_parser("solve", help="solve for the control band"))
    p.add_argument("--grid-csv", help="also write x, J, J' on a grid around the band")
    p.add_argument("--grid-points", type=int, default=401)
    p.set_defaults(func=cmd_solve)

    p = common(sub.add_parser("verify", help="check a solution against the optimality conditions"))
    p.add_argument("--solution", required=True, help="output of 'solve'")
    p.add_argument("--verify-tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_verify)

    p = common(sub.add_parser("simulate", help="Monte Carlo estimate of the cost at simulation.x0"))
    p.add_argument("--solution", help="use this solution instead of solving")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("sweep", help="comparative statics along one parameter"))
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s",
                        stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    except FeasibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INFEASIBLE
    except (ConvergenceError, NoBandError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NO_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
