import pytest

from spectrum_auction import load_fixture


@pytest.fixture
def single_ex():
    return load_fixture("single")


@pytest.fixture
def linear_ex():
    return load_fixture("linear")


@pytest.fixture
def ladder_ex():
    return load_fixture("ladder")
