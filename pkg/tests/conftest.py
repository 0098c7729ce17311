import pytest

from memthermo import SwitchingParams, ThermalFit


@pytest.fixture(scope="session")
def fit():
    return ThermalFit.default()


@pytest.fixture(scope="session")
def params():
    return SwitchingParams()
