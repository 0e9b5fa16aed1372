import pytest

from divlab.diffusion import solve_diffusion
from divlab.model import CLParameters, example_parameters, exponential, scale

ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return example_parameters()


@pytest.fixture(scope="session")
def sol(params):
    return solve_diffusion(params)


@pytest.fixture(scope="session")
def exp_params():
    return CLParameters(lam=10.0, theta=0.07, delta=0.1, claim=exponential(1.0))


@pytest.fixture(scope="session")
def scaled1(params):
    return scale(params, 1)
