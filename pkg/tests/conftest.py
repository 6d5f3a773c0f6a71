import pytest

from helpers import load_model


@pytest.fixture(scope="session")
def m1():
    return load_model("m1_coin")


@pytest.fixture(scope="session")
def m2():
    return load_model("m2_bbww")


@pytest.fixture(scope="session")
def fig3():
    return load_model("fig3")


@pytest.fixture(scope="session")
def cycle3():
    return load_model("cycle3")


@pytest.fixture(scope="session")
def daynight():
    return load_model("daynight")


@pytest.fixture(scope="session")
def house():
    return load_model("house")


@pytest.fixture(scope="session")
def rain():
    return load_model("rain")
