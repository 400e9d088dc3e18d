import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fsa_lab.model import ArrayGeometry, Terminal
from fsa_lab.nullsteer import FrequencyLimits
from fsa_lab.secrecy import Scenario

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

F0 = 60e9
C = 3e8


def dbm(p):
    return 10 ** ((p - 30) / 10)


def reference_problem(n=13, power_dbm=30.0, df_max=4e6):
    """Two cooperating Eves near a broadside Bob at 60 GHz."""
    geom = ArrayGeometry(n, F0)

    def site(deg, r):
        return Terminal.free_space(np.sin(np.deg2rad(deg)), r, F0)

    scenario = Scenario(site(0.0, 40.0), [site(1.71, 45.0), site(1.43, 40.0)], dbm(-80), dbm(power_dbm))
    return scenario, geom, FrequencyLimits(2 * F0, df_max)


@pytest.fixture
def reference():
    return reference_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
