"""Case file input/output: native sectioned-text format and a restricted MATPOWER-style import."""

from __future__ import annotations

import re
import warnings
from pathlib import Path

from . import tomlio
from .grid import Branch, Bus, CaseValidationError, Generator, GridCase, WindFarm, validate_case

__all__ = [
    "CaseFormatError",
    "parse_case",
    "serialize_case",
    "load_case",
    "save_case",
    "parse_matpower",
]


class CaseFormatError(ValueError):
    """The case text is syntactically or structurally malformed."""


def parse_case(text: str) -> GridCase:
    """Parse case-file content into a validated GridCase.

    Accepts the native sectioned-text format, or MATPOWER-style content
    (detected by an ``mpc.`` assignment or ``function mpc`` header).
    """
    if re.search(r"^\s*(function\s+mpc|mpc\.)", text, re.MULTILINE):
        return parse_matpower(text)
    return _parse_native(text)


def _require(table: dict, key: str, kind: str, position: int):
    if key not in table:
        raise CaseFormatError(f"{kind} entry {position} is missing field {key!r}")
    return table[key]


def _parse_native(text: str) -> GridCase:
    try:
        data = tomlio.loads(text)
    except tomlio.FormatError as exc:
        raise CaseFormatError(f"parse error at {exc}") from exc

    if "bus" not in data or not data["bus"]:
        raise CaseFormatError("case defines no [[bus]] entries")
    base_mva = float(data.get("base_mva", 100.0))

    wind_buses = {int(_require(e, "bus", "wind_farm", i + 1)) for i, e in enumerate(data.get("wind_farm", []))}

    buses = []
    for i, entry in enumerate(data["bus"]):
        bus_id = int(_require(entry, "id", "bus", i + 1))
        declared = entry.get("has_wind")
        has_wind = bus_id in wind_buses
        if declared is not None and bool(declared) != has_wind:
            raise CaseValidationError(
                f"bus {bus_id} has_wind flag inconsistent with wind farm table"
            )
        buses.append(Bus(id=bus_id, load_mw=float(entry.get("load_mw", 0.0)), has_wind=has_wind))

    branches = [
        Branch(
            from_bus=int(_require(e, "from_bus", "branch", i + 1)),
            to_bus=int(_require(e, "to_bus", "branch", i + 1)),
            reactance=float(_require(e, "reactance", "branch", i + 1)),
            flow_limit_mw=float(_require(e, "flow_limit_mw", "branch", i + 1)),
        )
        for i, e in enumerate(data.get("branch", []))
    ]
    generators = [
        Generator(
            bus=int(_require(e, "bus", "generator", i + 1)),
            p_min_mw=float(_require(e, "p_min_mw", "generator", i + 1)),
            p_max_mw=float(_require(e, "p_max_mw", "generator", i + 1)),
            cost_c2=float(e.get("cost_c2", 0.0)),
            cost_c1=float(e.get("cost_c1", 0.0)),
            cost_c0=float(e.get("cost_c0", 0.0)),
        )
        for i, e in enumerate(data.get("generator", []))
    ]
    farms = [
        WindFarm(
            bus=int(_require(e, "bus", "wind_farm", i + 1)),
            capacity_mw=float(_require(e, "capacity_mw", "wind_farm", i + 1)),
        )
        for i, e in enumerate(data.get("wind_farm", []))
    ]

    case = GridCase(
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(generators),
        wind_farms=tuple(farms),
        base_mva=base_mva,
    )
    return validate_case(case)


def serialize_case(case: GridCase) -> str:
    """Render a GridCase back to the native text format (round-trip safe)."""
    data: dict = {"base_mva": float(case.base_mva)}
    data["bus"] = [
        {"id": b.id, "load_mw": float(b.load_mw), "has_wind": b.has_wind} for b in case.buses
    ]
    data["branch"] = [
        {
            "from_bus": br.from_bus,
            "to_bus": br.to_bus,
            "reactance": float(br.reactance),
            "flow_limit_mw": float(br.flow_limit_mw),
        }
        for br in case.branches
    ]
    data["generator"] = [
        {
            "bus": g.bus,
            "p_min_mw": float(g.p_min_mw),
            "p_max_mw": float(g.p_max_mw),
            "cost_c2": float(g.cost_c2),
            "cost_c1": float(g.cost_c1),
            "cost_c0": float(g.cost_c0),
        }
        for g in case.generators
    ]
    data["wind_farm"] = [
        {"bus": f.bus, "capacity_mw": float(f.capacity_mw)} for f in case.wind_farms
    ]
    return tomlio.dumps(data)


def load_case(path: str | Path) -> GridCase:
    return parse_case(Path(path).read_text(encoding="utf-8"))


def save_case(case: GridCase, path: str | Path) -> None:
    Path(path).write_text(serialize_case(case), encoding="utf-8")


# --- MATPOWER-style import -------------------------------------------------
#
# Restricted reader: only the mpc.baseMVA scalar and the mpc.bus, mpc.branch,
# mpc.gen, mpc.gencost matrix blocks are interpreted, and only polynomial
# costs (model 2) of degree <= 2. Resistance, shunt and charging terms are
# ignored with a warning since the DC model has no use for them.

_BLOCK_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.DOTALL)
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([0-9.eE+-]+)\s*;")


class MatpowerImportError(CaseFormatError):
    """Input uses MATPOWER features outside the supported DC subset."""


def _matrix_rows(body: str, name: str) -> list[list[float]]:
    rows = []
    for lineno, raw in enumerate(body.split("\n"), start=1):
        line = raw.split("%", 1)[0].strip().rstrip(";").strip()
        if not line:
            continue
        try:
            rows.append([float(tok) for tok in line.replace(",", " ").split()])
        except ValueError as exc:
            raise CaseFormatError(f"mpc.{name}: bad numeric row at block line {lineno}") from exc
    return rows


def parse_matpower(text: str) -> GridCase:
    blocks = {m.group(1): m.group(2) for m in _BLOCK_RE.finditer(text)}
    scalars = {m.group(1): float(m.group(2)) for m in _SCALAR_RE.finditer(text)}
    for required in ("bus", "branch", "gen"):
        if required not in blocks:
            raise CaseFormatError(f"missing mpc.{required} block")

    base_mva = scalars.get("baseMVA", 100.0)
    bus_rows = _matrix_rows(blocks["bus"], "bus")
    branch_rows = _matrix_rows(blocks["branch"], "branch")
    gen_rows = _matrix_rows(blocks["gen"], "gen")
    cost_rows = _matrix_rows(blocks["gencost"], "gencost") if "gencost" in blocks else []

    ignored_shunts = sum(1 for row in bus_rows if row[4] != 0 or row[5] != 0)
    buses = [Bus(id=int(row[0]), load_mw=float(row[2])) for row in bus_rows]

    ignored_resistance = 0
    branches = []
    for i, row in enumerate(branch_rows):
        if len(row) > 10 and row[10] == 0:
            raise MatpowerImportError(f"branch {i + 1} is out of service; unsupported")
        if row[2] != 0 or row[4] != 0:
            ignored_resistance += 1
        if len(row) > 8 and row[8] not in (0.0, 1.0):
            raise MatpowerImportError(f"branch {i + 1} has an off-nominal tap ratio; unsupported")
        if len(row) > 9 and row[9] != 0:
            raise MatpowerImportError(f"branch {i + 1} has a phase shift; unsupported")
        rate = float(row[5])
        branches.append(
            Branch(
                from_bus=int(row[0]),
                to_bus=int(row[1]),
                reactance=float(row[3]),
                flow_limit_mw=rate,
            )
        )

    if cost_rows and len(cost_rows) != len(gen_rows):
        raise MatpowerImportError("mpc.gencost must have one row per generator")

    generators = []
    for i, row in enumerate(gen_rows):
        if len(row) > 7 and row[7] == 0:
            raise MatpowerImportError(f"generator {i + 1} is out of service; unsupported")
        c2 = c1 = c0 = 0.0
        if cost_rows:
            cost = cost_rows[i]
            model, n_coef = int(cost[0]), int(cost[3])
            if model != 2:
                raise MatpowerImportError(
                    f"generator {i + 1} uses cost model {model}; only polynomial model 2 is supported"
                )
            if n_coef > 3:
                raise MatpowerImportError(
                    f"generator {i + 1} polynomial cost has degree > 2; unsupported"
                )
            coeffs = [0.0] * (3 - n_coef) + list(cost[4 : 4 + n_coef])
            c2, c1, c0 = coeffs
        generators.append(
            Generator(
                bus=int(row[0]),
                p_min_mw=float(row[9]),
                p_max_mw=float(row[8]),
                cost_c2=c2,
                cost_c1=c1,
                cost_c0=c0,
            )
        )

    if ignored_resistance or ignored_shunts:
        warnings.warn(
            f"DC import ignored resistance/charging on {ignored_resistance} branches "
            f"and shunt elements on {ignored_shunts} buses",
            stacklevel=2,
        )

    case = GridCase(
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(generators),
        wind_farms=(),
        base_mva=base_mva,
    )
    return validate_case(case)


def add_wind_farms(case: GridCase, buses: list[int], capacity_mw: float) -> GridCase:
    """Attach one wind farm of the given capacity to each listed bus."""
    farms = case.wind_farms + tuple(WindFarm(bus=b, capacity_mw=capacity_mw) for b in buses)
    windy = {f.bus for f in farms}
    new_buses = tuple(
        Bus(id=b.id, load_mw=b.load_mw, has_wind=b.id in windy) for b in case.buses
    )
    return validate_case(
        GridCase(
            buses=new_buses,
            branches=case.branches,
            generators=case.generators,
            wind_farms=farms,
            base_mva=case.base_mva,
        )
    )
