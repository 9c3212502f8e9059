import pytest

from util import azt_counts, cholestyramine_counts, pertussis_counts


@pytest.fixture
def azt():
    return azt_counts()


@pytest.fixture
def pertussis():
    return pertussis_counts()


@pytest.fixture
def cholestyramine():
    return cholestyramine_counts()
