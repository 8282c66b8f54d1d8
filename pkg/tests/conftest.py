import pytest

from snsim.potentials import PhysParams
from snsim.scenarios import ScenarioConfig, build_figure1


@pytest.fixture(scope="session")
def phys():
    return PhysParams()


# reduced oscillating-soliton run shared by the guidance tests: the same
# physics as the headline configuration, smaller grid, still resolved
SMALL_FIG_CFG = ScenarioConfig(scenario="figure1", n_points=2048)


@pytest.fixture(scope="session")
def small_figure1():
    return build_figure1(SMALL_FIG_CFG)


@pytest.fixture(scope="session")
def small_figure1_cfg():
    return SMALL_FIG_CFG
