"""Risk-aware network-constrained economic dispatch.

Builds DC power-flow models from grid case files, converts a probabilistic
wind-delivery requirement into per-farm reserve bounds via Monte Carlo
sampling and order statistics, solves the resulting convex QP with an
interior-point method, prices buses from the nodal-balance duals, and
validates the achieved risk empirically.
"""

from .caseio import (
    CaseFormatError,
    add_wind_farms,
    load_case,
    parse_case,
    parse_matpower,
    save_case,
    serialize_case,
)
from .dcmodel import DcModel, build_dc_model
from .dispatch import (
    DispatchInfeasibleError,
    DispatchProblem,
    DispatchSolution,
    assemble,
    curtailment,
    solve_dispatch,
)
from .forecast import (
    ForecastModel,
    ReserveVector,
    ScenarioSet,
    estimate_covariance,
    reserve_boosted,
    reserve_min,
    reserve_order_statistic,
    sample,
)
from .grid import (
    Branch,
    Bus,
    CaseValidationError,
    Generator,
    GridCase,
    WindFarm,
    scale_for_penetration,
    scale_loads,
    validate_case,
)
from .qp import QpSolution, QuadProgram, evaluate_kkt, presolve
from .qp import solve as solve_qp
from .risk import RiskReport, validate

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "Bus",
    "CaseFormatError",
    "CaseValidationError",
    "DcModel",
    "DispatchInfeasibleError",
    "DispatchProblem",
    "DispatchSolution",
    "ForecastModel",
    "Generator",
    "GridCase",
    "QpSolution",
    "QuadProgram",
    "ReserveVector",
    "RiskReport",
    "ScenarioSet",
    "WindFarm",
    "add_wind_farms",
    "assemble",
    "build_dc_model",
    "curtailment",
    "estimate_covariance",
    "evaluate_kkt",
    "load_case",
    "parse_case",
    "parse_matpower",
    "presolve",
    "reserve_boosted",
    "reserve_min",
    "reserve_order_statistic",
    "sample",
    "save_case",
    "scale_for_penetration",
    "scale_loads",
    "serialize_case",
    "solve_dispatch",
    "solve_qp",
    "validate",
    "validate_case",
]
