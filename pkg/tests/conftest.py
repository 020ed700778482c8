import numpy as np
import pytest

from gridshed import (
    BnbConfig,
    bundled_case_path,
    generate_risk_scenario,
    parse_case,
    sanitize_negative_loads,
)

# tight enough that optimal objectives are comparable at 1e-6
EXACT_CONFIG = dict(rel_gap=0.0, abs_gap=2.5e-7, time_limit=600.0)


@pytest.fixture(scope="session")
def toy_net():
    net, _ = sanitize_negative_loads(parse_case(bundled_case_path("case3_shutoff")))
    return net


@pytest.fixture(scope="session")
def case14_net():
    net, _ = sanitize_negative_loads(parse_case(bundled_case_path("pglib_opf_case14_ieee")))
    return net


@pytest.fixture
def tight_config():
    return BnbConfig(**EXACT_CONFIG)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def scenario_for(net, seed):
    return generate_risk_scenario(net, seed)
