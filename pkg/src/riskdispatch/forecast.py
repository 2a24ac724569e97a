"""Wind forecast model, Monte Carlo scenario sampling, and reserve reduction.

The forecast is a multivariate Gaussian per farm (mean vector, sample
covariance). Scenario sets are i.i.d. draws; reserves collapse a scenario set
into one per-farm upper bound for the scheduled wind injections, either the
min over samples, the min plus a boost, or a per-farm order statistic.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeds

__all__ = [
    "ForecastModel",
    "ScenarioSet",
    "ReserveVector",
    "psd_repair",
    "estimate_covariance",
    "sample",
    "reserve_min",
    "reserve_boosted",
    "reserve_order_statistic",
    "drop_incomplete_rows",
    "load_trace_csv",
    "write_trace_csv",
    "save_forecast_model",
    "load_forecast_model",
]


def psd_repair(matrix: np.ndarray) -> np.ndarray:
    """Project a symmetric matrix onto the PSD cone by clamping negative eigenvalues."""
    sym = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.size and eigvals[0] >= 0:
        return sym
    clipped = np.clip(eigvals, 0.0, None)
    repaired = (eigvecs * clipped) @ eigvecs.T
    return 0.5 * (repaired + repaired.T)


@dataclass(frozen=True)
class ForecastModel:
    """Gaussian wind model: per-farm mean (MW) and covariance (MW^2).

    The covariance is symmetrized and PSD-repaired at construction, so a
    slightly indefinite sample covariance is always accepted. farm_order maps
    vector positions to external wind farm bus ids.
    """

    mean: np.ndarray
    covariance: np.ndarray
    farm_order: tuple[int, ...] = ()

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if not np.all(np.isfinite(mean)):
            raise ValueError("forecast mean entries must be finite")
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean length")
        scale = max(1.0, float(np.abs(cov).max()) if cov.size else 1.0)
        if float(np.abs(cov - cov.T).max()) > 1e-10 * scale:
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", psd_repair(cov))
        object.__setattr__(self, "farm_order", tuple(self.farm_order))

    @property
    def n_farms(self) -> int:
        return self.mean.size

    def factor(self) -> np.ndarray:
        """Eigenvalue square-root factor L with L @ L.T == covariance.

        The eigenfactor (not Cholesky) is used so singular covariances, e.g.
        zero-variance farms, sample without regularization.
        """
        eigvals, eigvecs = np.linalg.eigh(self.covariance)
        return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


@dataclass(frozen=True)
class ScenarioSet:
    """S independent wind draws, one farm per column, in MW."""

    samples: np.ndarray
    seed: int

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if samples.shape[0] < 1:
            raise ValueError("a scenario set needs at least one sample")
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_farms(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class ReserveVector:
    """Per-farm upper bound on scheduled wind, truncated at zero."""

    z_res: np.ndarray
    alpha: float | None
    method: str

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z_res, dtype=float))
        if not np.all(np.isfinite(z)):
            raise ValueError("reserve entries must be finite")
        if np.any(z < 0):
            raise ValueError("reserve entries must be nonnegative")
        object.__setattr__(self, "z_res", z)


def estimate_covariance(history: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance (divisor T-1) of a T x W history, PSD-repaired.

    Rows with missing entries must be dropped by the caller first; see
    drop_incomplete_rows.
    """
    history = np.atleast_2d(np.asarray(history, dtype=float))
    n_rows = history.shape[0]
    if n_rows < 2:
        raise ValueError(f"need at least 2 complete history rows, got {n_rows}")
    if not np.all(np.isfinite(history)):
        raise ValueError("history contains missing entries; drop incomplete rows first")
    constant = np.all(history == history[0], axis=0)
    if np.any(constant):
        warnings.warn(
            f"{int(constant.sum())} history column(s) are constant; "
            "covariance will be singular",
            stacklevel=2,
        )
    cov = np.cov(history, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    return psd_repair(cov)


def _draw(model: ForecastModel, count: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal((count, model.n_farms))
    return model.mean + noise @ model.factor().T


def sample(
    model: ForecastModel,
    count: int,
    seed: int,
    clip_capacity: np.ndarray | None = None,
) -> ScenarioSet:
    """Draw ``count`` i.i.d. scenarios from the forecast Gaussian.

    Deterministic given the seed; draws come from the scheduling stream, which
    is disjoint from the validation stream used by the risk module. Samples
    are left unclipped (negatives allowed) unless a per-farm capacity vector
    is supplied, in which case they are clipped to [0, capacity].
    """
    if count < 1:
        raise ValueError("sample count must be at least 1")
    rng = seeds.rng_for(seed, seeds.SCHEDULING)
    draws = _draw(model, count, rng)
    if clip_capacity is not None:
        draws = np.clip(draws, 0.0, np.asarray(clip_capacity, dtype=float))
    return ScenarioSet(samples=draws, seed=seed)


def reserve_min(scenarios: ScenarioSet) -> ReserveVector:
    """Tightest sampled bound: the per-farm minimum over all samples, floored at zero."""
    z = np.maximum(0.0, scenarios.samples.min(axis=0))
    return ReserveVector(z_res=z, alpha=None, method="min")


def reserve_boosted(scenarios: ScenarioSet, delta: np.ndarray) -> ReserveVector:
    """Min-over-samples reserve lifted by a nonnegative per-farm boost."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if delta.shape != (scenarios.n_farms,):
        raise ValueError(
            f"delta has length {delta.size}, expected {scenarios.n_farms}"
        )
    if np.any(delta < 0):
        raise ValueError("delta entries must be nonnegative")
    base = np.maximum(0.0, scenarios.samples.min(axis=0))
    z = np.maximum(0.0, base + delta)
    return ReserveVector(z_res=z, alpha=None, method="min-plus-delta")


def order_statistic_index(alpha: float, n_samples: int) -> int:
    """1-based rank (descending order) of the reserve order statistic."""
    k = math.ceil((1.0 - alpha) * n_samples)
    if not 1 <= k <= n_samples:
        raise ValueError(
            f"sample count {n_samples} too small for risk level {alpha} (rank {k})"
        )
    return k


def reserve_order_statistic(scenarios: ScenarioSet, alpha: float) -> ReserveVector:
    """Per-farm k-th largest sample with k = ceil((1-alpha) * S), floored at zero."""
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    k = order_statistic_index(alpha, scenarios.n_samples)
    ordered = np.sort(scenarios.samples, axis=0)[::-1]
    z = np.maximum(0.0, ordered[k - 1])
    return ReserveVector(z_res=z, alpha=alpha, method="order-statistic")


# --- historical trace ingestion ---------------------------------------------


def drop_incomplete_rows(trace: np.ndarray) -> tuple[np.ndarray, int]:
    """Remove rows containing any missing (NaN) cell; returns (clean, dropped count)."""
    trace = np.atleast_2d(np.asarray(trace, dtype=float))
    keep = np.all(np.isfinite(trace), axis=1)
    return trace[keep], int((~keep).sum())


def load_trace_csv(path: str | Path) -> tuple[np.ndarray, int, list[str]]:
    """Read an hourly farm-output CSV: timestamp column first, one column per farm.

    Rows with any missing cell are dropped. Returns (values, dropped count,
    farm column names).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ValueError(f"{path}: expected a header with a timestamp and farm columns")
        names = [h.strip() for h in header[1:]]
        rows = []
        for row in reader:
            if not row:
                continue
            values = []
            for cell in row[1:]:
                cell = cell.strip()
                values.append(float(cell) if cell else math.nan)
            rows.append(values)
    trace = np.array(rows, dtype=float) if rows else np.empty((0, len(names)))
    clean, dropped = drop_incomplete_rows(trace)
    return clean, dropped, names


def write_trace_csv(path: str | Path, trace: np.ndarray, start: str = "2012-05-01T00:00") -> None:
    """Write a trace with ISO-8601 hourly timestamps; NaN cells become empty."""
    trace = np.atleast_2d(np.asarray(trace, dtype=float))
    n_hours, n_farms = trace.shape
    t0 = np.datetime64(start)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + [f"farm_{i + 1}" for i in range(n_farms)])
        for t in range(n_hours):
            stamp = str(t0 + np.timedelta64(t, "h"))
            cells = ["" if not math.isfinite(v) else repr(float(v)) for v in trace[t]]
            writer.writerow([stamp] + cells)


# --- model serialization -----------------------------------------------------


def save_forecast_model(model: ForecastModel, path: str | Path) -> None:
    payload = {
        "mean": [float(v) for v in model.mean],
        "covariance": [[float(v) for v in row] for row in model.covariance],
        "farm_order": list(model.farm_order),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_forecast_model(path: str | Path) -> ForecastModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return ForecastModel(
        mean=np.array(payload["mean"], dtype=float),
        covariance=np.array(payload["covariance"], dtype=float),
        farm_order=tuple(int(b) for b in payload.get("farm_order", ())),
    )
