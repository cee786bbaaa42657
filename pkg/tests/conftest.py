from importlib.resources import files

import pytest

from igesdse import coupling, scenario
from igesdse.model import load_model

DATA = files("igesdse") / "data"


@pytest.fixture(scope="session")
def three_node():
    return load_model(DATA / "threenode.json")


@pytest.fixture(scope="session")
def iges():
    return load_model(DATA / "iges30_39.json")


@pytest.fixture(scope="session")
def iges_joint(iges):
    return coupling.build_joint(iges)


@pytest.fixture(scope="session")
def iges_truth(iges, iges_joint):
    return scenario.simulate_truth(iges, iges_joint)


@pytest.fixture(scope="session")
def three_joint(three_node):
    return coupling.build_joint(three_node)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
