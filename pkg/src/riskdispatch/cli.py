"""Command-line interface.

    dispatch solve     --case FILE --scenario TAG --alpha F [options]
    dispatch sweep     --config FILE [--jobs N]
    dispatch validate  --solution FILE --model FILE --alpha F [--trials N]
    dispatch gen-trace --hours N --farms W [--seed N]

Exit codes: 0 success, 2 infeasible dispatch, 3 parse or validation error,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments, risk
from .caseio import CaseFormatError, load_case
from .dcmodel import build_dc_model
from .dispatch import (
    DispatchInfeasibleError,
    DispatchProblem,
    solution_to_csv,
    solution_to_json,
    solve_dispatch,
)
from .forecast import load_forecast_model, reserve_order_statistic, sample, save_forecast_model, write_trace_csv
from .grid import CaseValidationError, scale_for_penetration, scale_loads
from .experiments import ConfigError

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_PARSE = 3
EXIT_SOLVER = 4


def _parse_scenario(text: str) -> str | list[float]:
    if "," in text:
        return [float(tok) for tok in text.split(",")]
    try:
        return [float(text)]
    except ValueError:
        return text


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispatch",
        description="Risk-aware network-constrained economic dispatch",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve_p = sub.add_parser("solve", help="dispatch one scenario at one risk level")
    solve_p.add_argument("--case", required=True, help="case file path or bundled name (ieee30)")
    solve_p.add_argument("--scenario", default="high-wind",
                         help="low-wind | high-wind | trace-hour:T | comma-separated MW means")
    solve_p.add_argument("--alpha", type=float, required=True, help="risk level in (0,1)")
    solve_p.add_argument("--samples", type=int, default=experiments.DEFAULT_SAMPLES)
    solve_p.add_argument("--seed", type=int, default=0)
    solve_p.add_argument("--trace", help="historical trace CSV (default: synthetic trace)")
    solve_p.add_argument("--synthetic-hours", type=int, default=589)
    solve_p.add_argument("--beta", type=float, default=1.0, help="scale all loads by this factor")
    solve_p.add_argument("--conventional-scale", type=float)
    solve_p.add_argument("--penetration", type=float)
    solve_p.add_argument("--mean-scale", type=float, default=1.0)
    solve_p.add_argument("--ref-bus", type=int)
    solve_p.add_argument("--validate-trials", type=int, default=0,
                         help="also validate achieved risk with this many trials")
    solve_p.add_argument("--output", help="write the solution JSON here (default: stdout)")
    solve_p.add_argument("--csv", help="also write the flat per-bus/per-line CSV here")
    solve_p.add_argument("--save-model", help="write the forecast model JSON here")

    sweep_p = sub.add_parser("sweep", help="run configured alpha/beta sweeps")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--jobs", type=int, help="parallel dispatch workers")

    val_p = sub.add_parser("validate", help="out-of-sample risk of a stored solution")
    val_p.add_argument("--solution", required=True)
    val_p.add_argument("--model", required=True)
    val_p.add_argument("--alpha", type=float, required=True)
    val_p.add_argument("--trials", type=int, default=risk.DEFAULT_TRIALS)
    val_p.add_argument("--seed", type=int, default=0)
    val_p.add_argument("--output", help="write the risk report JSON here (default: stdout)")

    trace_p = sub.add_parser("gen-trace", help="generate a synthetic hourly farm trace CSV")
    trace_p.add_argument("--hours", type=int, required=True)
    trace_p.add_argument("--farms", type=int, default=7)
    trace_p.add_argument("--seed", type=int, default=0)
    trace_p.add_argument("--output", default="trace.csv")
    return parser


def _cmd_solve(args) -> int:
    case = load_case(experiments.resolve_case_path(args.case))
    if args.conventional_scale is not None or args.penetration is not None:
        if args.conventional_scale is None or args.penetration is None:
            raise CaseValidationError("--conventional-scale and --penetration go together")
        case = scale_for_penetration(case, args.conventional_scale, args.penetration)
    if args.beta != 1.0:
        case = scale_loads(case, args.beta)
    model = build_dc_model(case, ref_bus_id=args.ref_bus)

    config = experiments.ExperimentConfig(
        case_path=args.case,
        scenario=_parse_scenario(args.scenario),
        alpha_list=[args.alpha],
        samples=args.samples,
        seed=args.seed,
        trace_path=args.trace,
        synthetic_hours=args.synthetic_hours,
        mean_scale=args.mean_scale,
    )
    capacities = np.array([f.capacity_mw for f in case.wind_farms])
    if capacities.size == 0:
        raise CaseValidationError("case has no wind farms; nothing to schedule against risk")
    trace_mw = experiments._load_trace(config, capacities)
    forecast = experiments.make_scenario(
        config.scenario, trace_mw, case.farm_order(), mean_scale=args.mean_scale
    )
    scenarios = sample(forecast, args.samples, args.seed)
    reserve = reserve_order_statistic(scenarios, args.alpha)
    solution = solve_dispatch(DispatchProblem(case, model, reserve))

    text = solution_to_json(solution, case)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.csv:
        Path(args.csv).write_text(solution_to_csv(solution, case), encoding="utf-8")
    if args.save_model:
        save_forecast_model(forecast, args.save_model)
    if args.validate_trials:
        report = risk.validate(
            solution.w, forecast, args.alpha, n_trials=args.validate_trials, seed=args.seed
        )
        sys.stdout.write(risk.report_to_json(report))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = experiments.load_config(args.config)
    if args.jobs:
        config.jobs = args.jobs
    written = experiments.run_sweep(config)
    for name, path in sorted(written.items()):
        print(f"{name}: {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    payload = json.loads(Path(args.solution).read_text(encoding="utf-8"))
    w = np.array(payload["w_mw"], dtype=float)
    model = load_forecast_model(args.model)
    report = risk.validate(w, model, args.alpha, n_trials=args.trials, seed=args.seed)
    text = risk.report_to_json(report)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_gen_trace(args) -> int:
    trace = experiments.generate_synthetic_trace(args.hours, n_farms=args.farms, seed=args.seed)
    write_trace_csv(args.output, trace)
    print(f"wrote {args.hours}x{args.farms} trace to {args.output}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "validate": _cmd_validate,
        "gen-trace": _cmd_gen_trace,
    }
    try:
        return handlers[args.command](args)
    except DispatchInfeasibleError as exc:
        print(f"infeasible: {exc.diagnosis}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CaseFormatError, CaseValidationError, ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
