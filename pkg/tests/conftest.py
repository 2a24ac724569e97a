from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from riskdispatch import build_dc_model, load_case, scale_for_penetration

FIXTURES = Path(__file__).parent / "fixtures"
IEEE30 = Path(__file__).parents[1] / "src" / "riskdispatch" / "data" / "ieee30.toml"

TWO_BUS_TEXT = """
base_mva = 100.0

[[bus]]
id = 1
load_mw = 0.0

[[bus]]
id = 2
load_mw = 50.0

[[branch]]
from_bus = 1
to_bus = 2
reactance = 0.1
flow_limit_mw = 100.0

[[generator]]
bus = 1
p_min_mw = 0.0
p_max_mw = 100.0
cost_c2 = 0.01
cost_c1 = 10.0
cost_c0 = 0.0
"""


@pytest.fixture(scope="session")
def ieee30_case():
    return load_case(IEEE30)


@pytest.fixture(scope="session")
def ieee30_scaled(ieee30_case):
    return scale_for_penetration(ieee30_case, 0.8, 0.2)


@pytest.fixture(scope="session")
def ieee30_model(ieee30_scaled):
    return build_dc_model(ieee30_scaled)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260811)
