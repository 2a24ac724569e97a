"""Experiment drivers: scenario construction, risk-level sweeps, and load-scaling sweeps.

A sweep shares one Monte Carlo scenario set across all risk levels, reduces
it to a reserve vector per level, dispatches, and (for the risk-level sweep)
validates the achieved risk out of sample. Load-scaling sweeps multiply every
bus load by beta to probe congestion; infeasible cells are recorded rather
than fatal. All outputs are plain CSV with pinned formatting so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import seeds, tomlio
from .caseio import load_case
from .dcmodel import DcModel, build_dc_model
from .dispatch import DispatchInfeasibleError, DispatchProblem, solve_dispatch
from .forecast import (
    ForecastModel,
    ScenarioSet,
    drop_incomplete_rows,
    estimate_covariance,
    load_trace_csv,
    reserve_order_statistic,
    sample,
)
from .grid import GridCase, scale_for_penetration, scale_loads
from .risk import validate

# Hourly mean vectors (MW per farm) for the two named seven-farm scenarios.
LOW_WIND_MEAN = (1.15, 1.37, 0.47, 1.05, 1.45, 1.64, 0.00)
HIGH_WIND_MEAN = (6.00, 0.31, 7.66, 8.01, 8.42, 8.44, 8.46)

DEFAULT_SAMPLES = 1000


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    case_path: str
    scenario: str | list[float] = "high-wind"
    alpha_list: list[float] = field(default_factory=lambda: [0.05])
    beta_list: list[float] = field(default_factory=list)
    samples: int = DEFAULT_SAMPLES
    n_trials: int = 100_000
    seed: int = 0
    output_dir: str = "."
    trace_path: str | None = None
    synthetic_hours: int = 589
    trace_normalized: bool = True
    conventional_scale: float | None = None
    penetration: float | None = None
    mean_scale: float = 1.0
    ref_bus: int | None = None
    jobs: int = 1

    def __post_init__(self):
        if not self.alpha_list:
            raise ConfigError("alpha_list must not be empty")
        for a in self.alpha_list:
            if not (0.0 < a < 1.0):
                raise ConfigError(f"alpha {a} outside (0, 1)")
        for b in self.beta_list:
            if b <= 0:
                raise ConfigError(f"beta {b} must be positive")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")


def load_config(path: str | Path) -> ExperimentConfig:
    raw = tomlio.loads(Path(path).read_text(encoding="utf-8"))
    synthetic = raw.pop("synthetic", {})
    known = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    config = ExperimentConfig(**raw)
    if isinstance(synthetic, dict) and "hours" in synthetic:
        config.synthetic_hours = int(synthetic["hours"])
    base = Path(path).parent
    if not Path(config.case_path).is_absolute():
        candidate = base / config.case_path
        if candidate.exists():
            config.case_path = str(candidate)
    if config.trace_path and not Path(config.trace_path).is_absolute():
        candidate = base / config.trace_path
        if candidate.exists():
            config.trace_path = str(candidate)
    return config


def resolve_case_path(case_path: str) -> Path:
    """Resolve a filesystem path, falling back to bundled case names (e.g. 'ieee30')."""
    path = Path(case_path)
    if path.exists():
        return path
    from importlib.resources import files

    builtin = files("riskdispatch") / "data" / f"{case_path}.toml"
    if builtin.is_file():
        return Path(str(builtin))
    raise FileNotFoundError(f"case file not found: {case_path}")


def generate_synthetic_trace(
    n_hours: int,
    n_farms: int = 7,
    seed: int = 0,
    missing_rate: float = 0.02,
) -> np.ndarray:
    """Correlated hourly farm-output series, normalized to [0, 1].

    Per farm, a logit-Gaussian AR(1): a persistent latent weather process with
    a shared regional component is squashed through a logistic map, so values
    stay inside [0, capacity] for capacity 1. About ``missing_rate`` of the
    rows get a blanked cell to exercise the missing-data path downstream.
    Deterministic for a given seed.
    """
    if n_hours < 2:
        raise ValueError("a trace needs at least 2 hours")
    if n_farms < 1:
        raise ValueError("a trace needs at least 1 farm")
    rng = seeds.rng_for(seed, seeds.TRACE)

    persistence = 0.96
    regional_share = 0.5
    level = rng.uniform(-1.1, 0.1, size=n_farms)
    gain = rng.uniform(1.2, 1.9, size=n_farms)

    common = rng.standard_normal()
    local = rng.standard_normal(n_farms)
    innovation = math.sqrt(1.0 - persistence**2)
    trace = np.empty((n_hours, n_farms))
    for t in range(n_hours):
        common = persistence * common + innovation * rng.standard_normal()
        local = persistence * local + innovation * rng.standard_normal(n_farms)
        latent = math.sqrt(regional_share) * common + math.sqrt(1.0 - regional_share) * local
        trace[t] = 1.0 / (1.0 + np.exp(-(level + gain * latent)))

    n_blank = int(round(missing_rate * n_hours))
    if n_blank:
        rows = rng.choice(n_hours, size=n_blank, replace=False)
        cols = rng.integers(0, n_farms, size=n_blank)
        trace[rows, cols] = np.nan
    return trace


def _load_trace(config: ExperimentConfig, capacities: np.ndarray) -> np.ndarray:
    """Complete-row trace in MW (normalized traces are scaled by farm capacity)."""
    if config.trace_path:
        clean, _, names = load_trace_csv(config.trace_path)
        if clean.shape[1] != capacities.size:
            raise ConfigError(
                f"trace has {len(names)} farm columns, case has {capacities.size} farms"
            )
    else:
        raw = generate_synthetic_trace(
            config.synthetic_hours, n_farms=capacities.size, seed=config.seed
        )
        clean, _ = drop_incomplete_rows(raw)
    if config.trace_normalized:
        clean = clean * capacities
    return clean


def make_scenario(
    which: str | list[float],
    trace_mw: np.ndarray,
    farm_order: tuple[int, ...],
    mean_scale: float = 1.0,
) -> ForecastModel:
    """Build the forecast Gaussian for a named or explicit scenario.

    ``which`` is "low-wind", "high-wind", "trace-hour:<t>" (mean equals trace
    row t), or an explicit per-farm mean vector in MW. The covariance is the
    sample covariance of the trace in all cases.
    """
    n_farms = trace_mw.shape[1]
    if isinstance(which, str):
        if which == "low-wind":
            mean = np.array(LOW_WIND_MEAN)
        elif which == "high-wind":
            mean = np.array(HIGH_WIND_MEAN)
        elif which.startswith("trace-hour:"):
            hour = int(which.split(":", 1)[1])
            if not 0 <= hour < trace_mw.shape[0]:
                raise ConfigError(f"trace hour {hour} outside 0..{trace_mw.shape[0] - 1}")
            mean = trace_mw[hour].copy()
        else:
            raise ConfigError(f"unknown scenario tag {which!r}")
    else:
        mean = np.asarray(list(which), dtype=float)
    if mean.size != n_farms:
        raise ConfigError(f"scenario mean has {mean.size} entries for {n_farms} farms")
    covariance = estimate_covariance(trace_mw)
    return ForecastModel(
        mean=mean * mean_scale, covariance=covariance, farm_order=farm_order
    )


@dataclass
class SweepContext:
    case: GridCase
    model: DcModel
    forecast: ForecastModel
    scenarios: ScenarioSet
    config: ExperimentConfig


def prepare(config: ExperimentConfig) -> SweepContext:
    case = load_case(resolve_case_path(config.case_path))
    if config.conventional_scale is not None or config.penetration is not None:
        if config.conventional_scale is None or config.penetration is None:
            raise ConfigError("conventional_scale and penetration must be given together")
        case = scale_for_penetration(case, config.conventional_scale, config.penetration)
    if not case.wind_farms:
        raise ConfigError("case has no wind farms; sweeps need at least one")
    model = build_dc_model(case, ref_bus_id=config.ref_bus)
    capacities = np.array([f.capacity_mw for f in case.wind_farms])
    trace_mw = _load_trace(config, capacities)
    forecast = make_scenario(
        config.scenario, trace_mw, case.farm_order(), mean_scale=config.mean_scale
    )
    scenarios = sample(forecast, config.samples, config.seed)
    return SweepContext(
        case=case, model=model, forecast=forecast, scenarios=scenarios, config=config
    )


def run_alpha_sweep(config: ExperimentConfig, context: SweepContext | None = None) -> list[dict]:
    """Dispatch and validate at each risk level, sharing one scenario set.

    Rows are sorted by alpha; the objective column must be non-increasing in
    alpha (larger reserves can only cost more), which is asserted here.
    """
    ctx = context if context is not None else prepare(config)
    rows = []
    for alpha in sorted(set(config.alpha_list)):
        reserve = reserve_order_statistic(ctx.scenarios, alpha)
        try:
            solution = solve_dispatch(DispatchProblem(ctx.case, ctx.model, reserve))
        except DispatchInfeasibleError as exc:
            raise DispatchInfeasibleError(
                f"alpha sweep aborted at alpha={alpha}: {exc.diagnosis}", status=exc.status
            ) from exc
        report = validate(
            solution.w, ctx.forecast, alpha, n_trials=config.n_trials, seed=config.seed
        )
        rows.append(
            {
                "alpha": alpha,
                "objective": solution.objective,
                "lmp_min": float(solution.lmp.min()),
                "lmp_max": float(solution.lmp.max()),
                "lmp_mean": float(solution.lmp.mean()),
                "wind_mw": float(solution.w.sum()),
                "reserve_mw": float(reserve.z_res.sum()),
                "n_binding_lines": len(solution.binding_lines),
                "empirical_risk": report.empirical_risk,
                "ci_halfwidth": report.ci_halfwidth,
                "risk_passed": report.passed,
            }
        )
    for prev, cur in zip(rows, rows[1:]):
        if cur["objective"] > prev["objective"] + 1e-7:
            raise RuntimeError(
                "objective increased with alpha: "
                f"{prev['alpha']} -> {cur['alpha']} gave "
                f"{prev['objective']} -> {cur['objective']}"
            )
    return rows


def _beta_cell(ctx: SweepContext, alpha: float, beta: float) -> dict:
    reserve = reserve_order_statistic(ctx.scenarios, alpha)
    scaled = scale_loads(ctx.case, beta)
    row: dict = {"alpha": alpha, "beta": beta}
    try:
        solution = solve_dispatch(DispatchProblem(scaled, ctx.model, reserve))
    except DispatchInfeasibleError as exc:
        row.update(status=exc.status, objective=None, diagnosis=exc.diagnosis, lmp=None,
                   binding_lines=())
        return row
    row.update(
        status="optimal",
        objective=solution.objective,
        diagnosis="",
        lmp=solution.lmp.copy(),
        binding_lines=solution.binding_lines,
    )
    return row


def run_beta_sweep(config: ExperimentConfig, context: SweepContext | None = None) -> list[dict]:
    """Grid of dispatches over (alpha, beta) with loads scaled by beta.

    Infeasible cells are recorded with their diagnosis and the sweep
    continues. Results come back in ascending (alpha, beta) order regardless
    of how the cells were scheduled.
    """
    if not config.beta_list:
        raise ConfigError("beta_list must not be empty for a beta sweep")
    ctx = context if context is not None else prepare(config)
    grid = [
        (alpha, beta)
        for alpha in sorted(set(config.alpha_list))
        for beta in sorted(set(config.beta_list))
    ]
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(lambda ab: _beta_cell(ctx, *ab), grid))
    else:
        rows = [_beta_cell(ctx, alpha, beta) for alpha, beta in grid]
    rows.sort(key=lambda r: (r["alpha"], r["beta"]))
    return rows


# --- CSV emission ------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def alpha_sweep_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = [
        "alpha", "objective", "lmp_min", "lmp_max", "lmp_mean", "wind_mw",
        "reserve_mw", "n_binding_lines", "empirical_risk", "ci_halfwidth", "risk_passed",
    ]
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in header])
    return out.getvalue()


def beta_sweep_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["alpha", "beta", "status", "objective", "n_binding_lines", "lmp_min", "lmp_max", "diagnosis"]
    )
    for row in rows:
        lmp = row["lmp"]
        writer.writerow(
            [
                _fmt(row["alpha"]),
                _fmt(row["beta"]),
                row["status"],
                _fmt(row["objective"]),
                len(row["binding_lines"]),
                _fmt(float(lmp.min())) if lmp is not None else "",
                _fmt(float(lmp.max())) if lmp is not None else "",
                row["diagnosis"],
            ]
        )
    return out.getvalue()


def lmp_profiles_csv(rows: list[dict], case: GridCase) -> str:
    """Per-bus price profiles for congestion plots, one row per (alpha, beta, bus)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["alpha", "beta", "bus", "lmp"])
    for row in rows:
        if row["lmp"] is None:
            continue
        for bus, price in zip(case.buses, row["lmp"]):
            writer.writerow([_fmt(row["alpha"]), _fmt(row["beta"]), bus.id, _fmt(price)])
    return out.getvalue()


def run_sweep(config: ExperimentConfig) -> dict[str, Path]:
    """Run the configured sweeps and write CSVs into output_dir; returns written paths."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx = prepare(config)
    written: dict[str, Path] = {}

    alpha_rows = run_alpha_sweep(config, context=ctx)
    path = out_dir / "alpha_sweep.csv"
    path.write_text(alpha_sweep_csv(alpha_rows), encoding="utf-8")
    written["alpha_sweep"] = path

    if config.beta_list:
        beta_rows = run_beta_sweep(config, context=ctx)
        path = out_dir / "beta_sweep.csv"
        path.write_text(beta_sweep_csv(beta_rows), encoding="utf-8")
        written["beta_sweep"] = path
        path = out_dir / "lmp_profiles.csv"
        path.write_text(lmp_profiles_csv(beta_rows, ctx.case), encoding="utf-8")
        written["lmp_profiles"] = path
    return written
