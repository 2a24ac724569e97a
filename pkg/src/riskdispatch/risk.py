"""Empirical certification of the wind-delivery chance constraint.

A scheduled injection vector w satisfies the constraint when harvested wind
covers it at every farm simultaneously; a Monte Carlo trial therefore counts
as a violation as soon as any coordinate of the draw falls below w. Since the
joint event is at least as likely as any single farm's shortfall, the
reported risk is never smaller than the largest per-farm rate.

Validation draws come from a seed stream disjoint from the scheduling stream
(out-of-sample by construction).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeds
from .forecast import ForecastModel, _draw

DEFAULT_TRIALS = 100_000


@dataclass(frozen=True)
class RiskReport:
    empirical_risk: float
    n_trials: int
    alpha_target: float
    ci_halfwidth: float
    per_farm_violation_rates: np.ndarray
    passed: bool

    def __post_init__(self):
        object.__setattr__(
            self,
            "per_farm_violation_rates",
            np.atleast_1d(np.asarray(self.per_farm_violation_rates, dtype=float)),
        )


def validate(
    w: np.ndarray,
    model: ForecastModel,
    alpha_target: float,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    batch: int = 20_000,
) -> RiskReport:
    """Estimate the joint shortfall probability of schedule w under the forecast model."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.size != model.n_farms:
        raise ValueError(f"w has {w.size} entries for {model.n_farms} farms")
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")

    rng = seeds.rng_for(seed, seeds.VALIDATION)
    violations = 0
    per_farm = np.zeros(w.size)
    remaining = n_trials
    while remaining > 0:
        count = min(batch, remaining)
        draws = _draw(model, count, rng)
        short = draws < w
        violations += int(short.any(axis=1).sum())
        per_farm += short.sum(axis=0)
        remaining -= count

    risk = violations / n_trials
    halfwidth = 1.96 * np.sqrt(risk * (1.0 - risk) / n_trials)
    return RiskReport(
        empirical_risk=risk,
        n_trials=n_trials,
        alpha_target=alpha_target,
        ci_halfwidth=float(halfwidth),
        per_farm_violation_rates=per_farm / n_trials,
        passed=bool(risk + halfwidth <= alpha_target),
    )


def report_to_json(report: RiskReport) -> str:
    payload = {
        "empirical_risk": report.empirical_risk,
        "n_trials": report.n_trials,
        "alpha_target": report.alpha_target,
        "ci_halfwidth": report.ci_halfwidth,
        "per_farm_violation_rates": [float(v) for v in report.per_farm_violation_rates],
        "passed": report.passed,
    }
    return json.dumps(payload, indent=2) + "\n"


def report_csv_row(report: RiskReport) -> str:
    """One-line CSV row for sweep tables (no header)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            repr(float(report.alpha_target)),
            repr(float(report.empirical_risk)),
            repr(float(report.ci_halfwidth)),
            report.n_trials,
            int(report.passed),
        ]
    )
    return out.getvalue()


def save_report(report: RiskReport, path: str | Path) -> None:
    Path(path).write_text(report_to_json(report), encoding="utf-8")
