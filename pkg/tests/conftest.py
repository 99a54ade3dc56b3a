import numpy as np
import pytest

from kinlaw import goursat, viscous
from kinlaw.systems import get_chart

SMOOTH = {"rule": "sine", "amp": [0.5, 0.3]}


@pytest.fixture(scope="session")
def decoupled():
    return get_chart("decoupled")


@pytest.fixture(scope="session")
def psystem():
    return get_chart("p-system")


@pytest.fixture(scope="session")
def dec_family(decoupled):
    return goursat.family_for_chart(decoupled, 33)


@pytest.fixture(scope="session")
def p_family(psystem):
    return goursat.family_for_chart(psystem, 32)


@pytest.fixture(scope="session")
def smooth_solution(decoupled):
    return viscous.exact_decoupled_solution(decoupled, SMOOTH, 128, 0.25, 64)


@pytest.fixture(scope="session")
def constant_solution(decoupled):
    return viscous.exact_decoupled_solution(
        decoupled, {"rule": "constant", "value": [0.3, -0.2]}, 64, 0.2, 32)


@pytest.fixture(scope="session")
def shock_solution():
    cfg = {"chart": {"id": "decoupled"}, "nx": 256, "T": 0.3,
           "epsilon": 0.01, "snapshots": 120,
           "initial": {"rule": "two_jump", "left": [0.8, 0.0],
                       "right": [-0.4, 0.0], "positions": [0.25, 0.75]},
           "window": [0.15, 0.45]}
    return viscous.simulate(cfg)


def rng(seed=0):
    return np.random.default_rng(seed)
