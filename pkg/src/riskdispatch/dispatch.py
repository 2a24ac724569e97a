"""Risk-aware network-constrained economic dispatch.

Assembles the convex quadratic program over [p_G, w, theta]: quadratic
generation costs, per-bus power balance, line-flow limits, generator limits,
the reference-angle pin, and per-farm wind schedule caps given by a reserve
vector. Network quantities are handled in per-unit on the case base; costs
are evaluated on MW quantities; locational marginal prices come out of the
nodal-balance duals in $/MWh.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from . import qp
from .dcmodel import DcModel
from .forecast import ReserveVector
from .grid import GridCase

BINDING_DUAL_THRESHOLD = 1e-6  # $/MWh


class DispatchInfeasibleError(RuntimeError):
    """Dispatch has no feasible schedule; carries a diagnosis of why."""

    def __init__(self, diagnosis: str, status: str = "infeasible"):
        super().__init__(diagnosis)
        self.diagnosis = diagnosis
        self.status = status


@dataclass(frozen=True)
class DispatchProblem:
    case: GridCase
    model: DcModel
    reserve: ReserveVector

    def __post_init__(self):
        n_farms = len(self.case.wind_farms)
        if self.reserve.z_res.size != n_farms:
            raise ValueError(
                f"reserve has {self.reserve.z_res.size} entries for {n_farms} wind farms"
            )


@dataclass(frozen=True)
class DispatchSolution:
    p_g: np.ndarray          # MW per generator
    w: np.ndarray            # MW per wind farm
    theta: np.ndarray        # radians per bus, reference pinned to 0
    flows: np.ndarray        # MW per line
    objective: float         # $/h
    lmp: np.ndarray          # $/MWh per bus
    flow_duals: np.ndarray   # (L, 2): forward-limit and reverse-limit duals, $/MWh
    binding_lines: tuple[int, ...]
    solver: qp.QpSolution


def assemble(case: GridCase, model: DcModel, reserve: ReserveVector) -> qp.QuadProgram:
    """Build the dispatch QP.

    Decision layout: [p_G (per generator), w (per wind farm), theta (per bus)],
    all in per-unit. Equality rows: the nodal balance of every bus in internal
    order (this ordering is the LMP contract), then the reference-angle row.
    Inequality rows: +H theta <= f, -H theta <= f, p upper, p lower, w upper,
    w lower.
    """
    base = case.base_mva
    n_gen = len(case.generators)
    n_farm = len(case.wind_farms)
    n_bus = case.n_buses()
    n_line = len(case.branches)
    if reserve.z_res.size != n_farm:
        raise ValueError(f"reserve has {reserve.z_res.size} entries for {n_farm} wind farms")

    n = n_gen + n_farm + n_bus
    sl_p = slice(0, n_gen)
    sl_w = slice(n_gen, n_gen + n_farm)
    sl_t = slice(n_gen + n_farm, n)

    # Costs are polynomial in MW; with per-unit variables the quadratic
    # coefficient picks up base^2 and the linear one picks up base.
    Q = np.zeros((n, n))
    c = np.zeros(n)
    c0 = 0.0
    for g, gen in enumerate(case.generators):
        Q[g, g] = 2.0 * gen.cost_c2 * base * base
        c[g] = gen.cost_c1 * base
        c0 += gen.cost_c0

    A_eq = np.zeros((n_bus + 1, n))
    b_eq = np.zeros(n_bus + 1)
    gen_bus = case.gen_buses()
    farm_bus = case.farm_buses()
    for g in range(n_gen):
        A_eq[gen_bus[g], g] = 1.0
    for f in range(n_farm):
        A_eq[farm_bus[f], n_gen + f] = 1.0
    A_eq[:n_bus, sl_t] = -model.admittance
    b_eq[:n_bus] = case.loads_mw() / base
    A_eq[n_bus, n_gen + n_farm + model.ref_bus] = 1.0
    b_eq[n_bus] = 0.0

    limits = np.array([br.flow_limit_mw for br in case.branches]) / base
    p_max = np.array([g.p_max_mw for g in case.generators]) / base
    p_min = np.array([g.p_min_mw for g in case.generators]) / base
    w_max = reserve.z_res / base

    A_in = np.zeros((2 * n_line + 2 * n_gen + 2 * n_farm, n))
    b_in = np.zeros(A_in.shape[0])
    row = 0
    A_in[row : row + n_line, sl_t] = model.flow_matrix
    b_in[row : row + n_line] = limits
    row += n_line
    A_in[row : row + n_line, sl_t] = -model.flow_matrix
    b_in[row : row + n_line] = limits
    row += n_line
    for g in range(n_gen):
        A_in[row + g, g] = 1.0
    b_in[row : row + n_gen] = p_max
    row += n_gen
    for g in range(n_gen):
        A_in[row + g, g] = -1.0
    b_in[row : row + n_gen] = -p_min
    row += n_gen
    for f in range(n_farm):
        A_in[row + f, n_gen + f] = 1.0
    b_in[row : row + n_farm] = w_max
    row += n_farm
    # Wind schedules are floored at zero: negative injections are unphysical
    # and zero reserves would otherwise leave w unbounded below.
    for f in range(n_farm):
        A_in[row + f, n_gen + f] = -1.0
    b_in[row : row + n_farm] = 0.0

    return qp.QuadProgram(Q=Q, c=c, c0=c0, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in)


def diagnose_infeasibility(case: GridCase, model: DcModel, reserve: ReserveVector) -> str:
    """Explain an infeasible dispatch: supply shortfall first, then congestion."""
    demand = float(case.loads_mw().sum())
    capacity = case.total_conventional_mw() + float(reserve.z_res.sum())
    if demand > capacity + 1e-9:
        return (
            f"inadequate supply: total demand {demand:.3f} MW exceeds dispatchable "
            f"capacity {capacity:.3f} MW (conventional + wind reserve)"
        )
    relaxed = assemble(case, model, reserve)
    n_line = len(case.branches)
    keep = np.arange(2 * n_line, relaxed.n_in)
    no_lines = qp.QuadProgram(
        Q=relaxed.Q,
        c=relaxed.c,
        c0=relaxed.c0,
        A_eq=relaxed.A_eq,
        b_eq=relaxed.b_eq,
        A_in=relaxed.A_in[keep],
        b_in=relaxed.b_in[keep],
    )
    if qp.solve(no_lines).status == "optimal":
        return "transmission congestion: demand is dispatchable only by exceeding line limits"
    return "inadequate supply: no generation schedule satisfies the nodal balances"


def solve_dispatch(
    problem: DispatchProblem,
    tol: float = qp.DEFAULT_TOL,
    max_iter: int = qp.DEFAULT_MAX_ITER,
) -> DispatchSolution:
    """Solve the dispatch QP and extract schedules, flows, and prices."""
    case, model, reserve = problem.case, problem.model, problem.reserve
    base = case.base_mva
    program = assemble(case, model, reserve)
    solution = qp.solve(program, tol=tol, max_iter=max_iter)
    if solution.status != "optimal":
        if solution.status in ("infeasible", "max-iterations"):
            diagnosis = diagnose_infeasibility(case, model, reserve)
            raise DispatchInfeasibleError(diagnosis, status=solution.status)
        raise DispatchInfeasibleError(
            f"solver returned status {solution.status}", status=solution.status
        )

    n_gen = len(case.generators)
    n_farm = len(case.wind_farms)
    n_bus = case.n_buses()
    n_line = len(case.branches)

    x = solution.x
    p_g = x[:n_gen] * base
    w = x[n_gen : n_gen + n_farm] * base
    theta = x[n_gen + n_farm :].copy()
    theta -= theta[model.ref_bus]
    theta[model.ref_bus] = 0.0
    flows = model.flow_matrix @ theta * base

    # The optimal value rises by -nu per unit of equality right-hand side, so
    # the price of serving one extra MW of load at a bus is -nu / base.
    lmp = -solution.nu[:n_bus] / base
    lam = solution.lam
    flow_duals = np.column_stack([lam[:n_line], lam[n_line : 2 * n_line]]) / base
    binding = tuple(int(l) for l in np.flatnonzero(flow_duals.max(axis=1) > BINDING_DUAL_THRESHOLD))

    return DispatchSolution(
        p_g=p_g,
        w=w,
        theta=theta,
        flows=flows,
        objective=solution.objective,
        lmp=lmp,
        flow_duals=flow_duals,
        binding_lines=binding,
        solver=solution,
    )


def curtailment(actual_z: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Energy spilled when harvest exceeds schedule, and per-farm shortfall flags.

    Returns (curtailed, shortfall): curtailed[m] = max(0, actual_z[m] - w[m]);
    shortfall[m] is True where the harvest fell below the schedule.
    """
    actual_z = np.atleast_1d(np.asarray(actual_z, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if actual_z.shape != w.shape:
        raise ValueError(f"length mismatch: {actual_z.shape} vs {w.shape}")
    curtailed = np.maximum(0.0, actual_z - w)
    shortfall = actual_z < w
    return curtailed, shortfall


# --- serialization -----------------------------------------------------------


def solution_to_json(solution: DispatchSolution, case: GridCase) -> str:
    payload = {
        "objective_usd_per_h": solution.objective,
        "p_g_mw": [float(v) for v in solution.p_g],
        "w_mw": [float(v) for v in solution.w],
        "theta_rad": [float(v) for v in solution.theta],
        "flows_mw": [float(v) for v in solution.flows],
        "lmp_usd_per_mwh": [float(v) for v in solution.lmp],
        "flow_duals_usd_per_mwh": [[float(a), float(b)] for a, b in solution.flow_duals],
        "binding_lines": list(solution.binding_lines),
        "bus_ids": [b.id for b in case.buses],
        "generator_buses": [g.bus for g in case.generators],
        "wind_farm_buses": [f.bus for f in case.wind_farms],
        "solver": {
            "status": solution.solver.status,
            "iterations": solution.solver.iterations,
            "kkt_residuals": {k: float(v) for k, v in solution.solver.kkt_residuals.items()},
            "diag_floor_applied": bool(
                solution.solver.diagnostics.get("diag_floor_applied", False)
            ),
        },
    }
    return json.dumps(payload, indent=2) + "\n"


def solution_to_csv(solution: DispatchSolution, case: GridCase) -> str:
    """Flat plotting table: one row per bus (LMP), then one row per line (flow)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["kind", "id", "lmp_usd_per_mwh", "flow_mw", "limit_mw", "dual_fwd", "dual_rev"]
    )
    for i, bus in enumerate(case.buses):
        writer.writerow(["bus", bus.id, repr(float(solution.lmp[i])), "", "", "", ""])
    for l, branch in enumerate(case.branches):
        writer.writerow(
            [
                "line",
                l + 1,
                "",
                repr(float(solution.flows[l])),
                repr(float(branch.flow_limit_mw)),
                repr(float(solution.flow_duals[l, 0])),
                repr(float(solution.flow_duals[l, 1])),
            ]
        )
    return out.getvalue()
