"""DC power-flow matrices: incidence, susceptance, admittance, and the line flow map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridCase


@dataclass(frozen=True)
class DcModel:
    """DC network matrices over internal bus indices.

    incidence is L x M with +1 at the from-bus and -1 at the to-bus of each
    branch; susceptance_diag is diag(1/x_l); admittance is the M x M matrix
    incidence' * susceptance_diag * incidence (singular, with the all-ones
    vector in its nullspace); flow_matrix maps bus angles to per-unit line
    flows.
    """

    incidence: np.ndarray
    susceptance_diag: np.ndarray
    admittance: np.ndarray
    flow_matrix: np.ndarray
    ref_bus: int = 0


def build_dc_model(case: GridCase, ref_bus_id: int | None = None) -> DcModel:
    """Construct the DC matrices for a validated, connected case.

    ref_bus_id is an external bus id; it defaults to the first parsed bus.
    """
    index = case.bus_index()
    n_bus = len(case.buses)
    n_branch = len(case.branches)

    incidence = np.zeros((n_branch, n_bus))
    inv_reactance = np.zeros(n_branch)
    for l, br in enumerate(case.branches):
        incidence[l, index[br.from_bus]] = 1.0
        incidence[l, index[br.to_bus]] = -1.0
        inv_reactance[l] = 1.0 / br.reactance

    susceptance_diag = np.diag(inv_reactance)
    flow_matrix = inv_reactance[:, None] * incidence
    admittance = incidence.T @ flow_matrix

    if ref_bus_id is None:
        ref = 0
    else:
        if ref_bus_id not in index:
            raise ValueError(f"reference bus {ref_bus_id} not present in case")
        ref = index[ref_bus_id]

    return DcModel(
        incidence=incidence,
        susceptance_diag=susceptance_diag,
        admittance=admittance,
        flow_matrix=flow_matrix,
        ref_bus=ref,
    )
