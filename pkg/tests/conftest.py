import sys

import pytest

from plantolearn import data_path
from plantolearn.learning_domain import extend
from plantolearn.pddl import parse_domain, parse_problem
from plantolearn.planner import PlanningProblem


def load_domain(name):
    return parse_domain(data_path(name).read_text())


@pytest.fixture(scope="session")
def tv_base():
    return load_domain("tv_base.pddl")


@pytest.fixture(scope="session")
def household_base():
    return load_domain("household_base.pddl")


@pytest.fixture(scope="session")
def tv_ext(tv_base):
    return extend(tv_base, [("Tv", "Is_Turned_On")])[0]


@pytest.fixture(scope="session")
def tv0_problem(tv_ext):
    return parse_problem(data_path("tv0_problem.pddl").read_text(), tv_ext)


@pytest.fixture(scope="session")
def tv0(tv_ext, tv0_problem):
    return PlanningProblem.from_problem(tv_ext, tv0_problem)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
