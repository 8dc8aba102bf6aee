"""Shared, expensive models built once per session."""

import pytest

from renewal_intersection import build_reg_varying, mass_function, ssrw_return_law
from renewal_intersection.intersect import build

N17 = 2**17
N20 = 2**20


@pytest.fixture(scope="session")
def ssrw_pair():
    law = ssrw_return_law(N20)
    return build(law, law, N20)


@pytest.fixture(scope="session")
def pair07():
    law = build_reg_varying(0.7, horizon=N17)
    return build(law, law, N17)


@pytest.fixture(scope="session")
def pair_15_25():
    return build(build_reg_varying(1.5, horizon=N17), build_reg_varying(2.5, horizon=N17), N17)


@pytest.fixture(scope="session")
def transient_pair():
    return build(build_reg_varying(1.5, horizon=N17, defect=0.3),
                 build_reg_varying(1.5, horizon=N17, defect=0.4), N17)


@pytest.fixture(scope="session")
def law25():
    return build_reg_varying(2.5, horizon=N17)


@pytest.fixture(scope="session")
def mass25(law25):
    return mass_function(law25, N17)


@pytest.fixture(scope="session")
def pair25(law25, mass25):
    return build((law25, mass25), (law25, mass25), N17)
