"""Network data model: buses, branches, generators, wind farms, and validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


class CaseValidationError(ValueError):
    """A grid case violates a structural invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    load_mw: float = 0.0
    has_wind: bool = False


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    reactance: float
    flow_limit_mw: float


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min_mw: float
    p_max_mw: float
    cost_c2: float = 0.0
    cost_c1: float = 0.0
    cost_c0: float = 0.0

    def cost(self, p_mw: float) -> float:
        return self.cost_c2 * p_mw**2 + self.cost_c1 * p_mw + self.cost_c0

    def marginal_cost(self, p_mw: float) -> float:
        return 2.0 * self.cost_c2 * p_mw + self.cost_c1


@dataclass(frozen=True)
class WindFarm:
    bus: int
    capacity_mw: float


@dataclass(frozen=True)
class GridCase:
    """Static network description.

    Bus ids are the external (file) ids; they may be arbitrary but must be
    unique. Internal 0-based contiguous indices follow the bus list order
    and are obtained through :meth:`bus_index`.
    """

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    wind_farms: tuple[WindFarm, ...]
    base_mva: float = 100.0

    def bus_index(self) -> dict[int, int]:
        """External bus id -> internal 0-based index."""
        return {bus.id: i for i, bus in enumerate(self.buses)}

    def n_buses(self) -> int:
        return len(self.buses)

    def loads_mw(self) -> np.ndarray:
        return np.array([bus.load_mw for bus in self.buses], dtype=float)

    def gen_buses(self) -> np.ndarray:
        """Internal bus index of each generator."""
        index = self.bus_index()
        return np.array([index[g.bus] for g in self.generators], dtype=int)

    def farm_buses(self) -> np.ndarray:
        """Internal bus index of each wind farm."""
        index = self.bus_index()
        return np.array([index[f.bus] for f in self.wind_farms], dtype=int)

    def farm_order(self) -> tuple[int, ...]:
        """External bus ids of the wind farms, in case order."""
        return tuple(f.bus for f in self.wind_farms)

    def total_conventional_mw(self) -> float:
        return float(sum(g.p_max_mw for g in self.generators))

    def total_wind_capacity_mw(self) -> float:
        return float(sum(f.capacity_mw for f in self.wind_farms))


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise CaseValidationError(f"{name} is not finite")


def validate_case(case: GridCase) -> GridCase:
    """Check every structural invariant, raising CaseValidationError on the first violation."""
    if not case.buses:
        raise CaseValidationError("case has no buses")
    if case.base_mva <= 0 or not math.isfinite(case.base_mva):
        raise CaseValidationError("base_mva must be a positive finite number")

    ids = [bus.id for bus in case.buses]
    if len(set(ids)) != len(ids):
        raise CaseValidationError("duplicate bus ids")
    known = set(ids)

    for bus in case.buses:
        _check_finite(f"bus {bus.id} load_mw", bus.load_mw)
        if bus.load_mw < 0:
            raise CaseValidationError(f"bus {bus.id} has negative load")

    for k, br in enumerate(case.branches):
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise CaseValidationError(
                    f"dangling bus reference: branch {k + 1} references bus {end}"
                )
        if br.from_bus == br.to_bus:
            raise CaseValidationError(f"branch {k + 1} connects bus {br.from_bus} to itself")
        if not (br.reactance > 0) or not math.isfinite(br.reactance):
            raise CaseValidationError(f"branch {k + 1} reactance must be strictly positive")
        if not (br.flow_limit_mw > 0) or not math.isfinite(br.flow_limit_mw):
            raise CaseValidationError(f"branch {k + 1} flow limit must be positive and finite")

    for k, gen in enumerate(case.generators):
        if gen.bus not in known:
            raise CaseValidationError(
                f"dangling bus reference: generator {k + 1} references bus {gen.bus}"
            )
        if not (0 <= gen.p_min_mw <= gen.p_max_mw):
            raise CaseValidationError(
                f"generator {k + 1} requires 0 <= p_min_mw <= p_max_mw"
            )
        if gen.cost_c2 < 0:
            raise CaseValidationError(f"generator {k + 1} has non-convex cost (cost_c2 < 0)")
        if gen.cost_c1 + 2.0 * gen.cost_c2 * gen.p_min_mw <= 0:
            raise CaseValidationError(
                f"generator {k + 1} cost is not strictly increasing on its output range"
            )
        for name in ("cost_c2", "cost_c1", "cost_c0"):
            _check_finite(f"generator {k + 1} {name}", getattr(gen, name))
            if getattr(gen, name) < 0:
                raise CaseValidationError(f"generator {k + 1} {name} must be >= 0")

    farm_buses = [f.bus for f in case.wind_farms]
    if len(set(farm_buses)) != len(farm_buses):
        raise CaseValidationError("more than one wind farm on a bus")
    for k, farm in enumerate(case.wind_farms):
        if farm.bus not in known:
            raise CaseValidationError(
                f"dangling bus reference: wind farm {k + 1} references bus {farm.bus}"
            )
        if not (farm.capacity_mw > 0) or not math.isfinite(farm.capacity_mw):
            raise CaseValidationError(f"wind farm {k + 1} capacity must be positive")

    windy = set(farm_buses)
    for bus in case.buses:
        if bus.has_wind != (bus.id in windy):
            raise CaseValidationError(
                f"bus {bus.id} has_wind flag inconsistent with wind farm table"
            )

    _check_connected(case)
    return case


def _check_connected(case: GridCase) -> None:
    n = len(case.buses)
    index = case.bus_index()
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for br in case.branches:
        i, j = index[br.from_bus], index[br.to_bus]
        adjacency[i].append(j)
        adjacency[j].append(i)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        node = stack.pop()
        for nb in adjacency[node]:
            if not seen[nb]:
                seen[nb] = True
                count += 1
                stack.append(nb)
    if count != n:
        missing = [case.buses[i].id for i, s in enumerate(seen) if not s]
        raise CaseValidationError(
            f"disconnected network: buses {missing} unreachable from bus {case.buses[0].id}"
        )


def scale_loads(case: GridCase, beta: float) -> GridCase:
    """Return a copy with every bus load multiplied by ``beta``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    buses = tuple(replace(b, load_mw=b.load_mw * beta) for b in case.buses)
    return replace(case, buses=buses)


def scale_for_penetration(
    case: GridCase, conventional_scale: float, penetration: float
) -> GridCase:
    """Shrink conventional capacity and size the wind farms to a target penetration.

    Generator limits are multiplied by ``conventional_scale``; all wind farm
    capacities are set equal so that total wind capacity divided by total
    installed capacity equals ``penetration`` while total installed capacity
    stays at the pre-scaling conventional total. This is only consistent when
    ``conventional_scale + penetration == 1``.
    """
    if not (0 < conventional_scale <= 1):
        raise ValueError("conventional_scale must lie in (0, 1]")
    if not (0 < penetration < 1):
        raise ValueError("penetration must lie in (0, 1)")
    if not case.wind_farms:
        raise CaseValidationError("cannot set wind penetration: case has no wind farms")
    if abs(conventional_scale + penetration - 1.0) > 1e-9:
        raise CaseValidationError(
            "penetration infeasible given scale: total installed capacity can stay "
            f"fixed only when conventional_scale + penetration == 1 "
            f"(got {conventional_scale} + {penetration})"
        )
    total_conventional = case.total_conventional_mw()
    if total_conventional <= 0:
        raise CaseValidationError("case has no conventional capacity to scale")
    wind_total = penetration * total_conventional
    per_farm = wind_total / len(case.wind_farms)
    generators = tuple(
        replace(
            g,
            p_min_mw=g.p_min_mw * conventional_scale,
            p_max_mw=g.p_max_mw * conventional_scale,
        )
        for g in case.generators
    )
    farms = tuple(replace(f, capacity_mw=per_farm) for f in case.wind_farms)
    return validate_case(replace(case, generators=generators, wind_farms=farms))
