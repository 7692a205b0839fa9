import pytest

from cashband.model import ABM, OU, ModelParams
from cashband.solver import solve_band

_LINES = pytest.StashKey[list]()


def base_params(**changes) -> ModelParams:
    p = ModelParams(rho=0.1, diffusion=ABM(0.0), sigma=5.4, kappa=0.5, c_neg=1.0, c_pos=1.0, l_cost=4.0, u_cost=2.0)
    return p.with_(**changes) if changes else p


def symmetric_params(**changes) -> ModelParams:
    return base_params(l_cost=2.0, u_cost=2.0, **changes)


def ou_params(**changes) -> ModelParams:
    p = ModelParams(rho=0.1, diffusion=OU(0.4), sigma=2.0, kappa=0.5, c_neg=1.0, c_pos=1.0, l_cost=1.0, u_cost=1.0)
    return p.with_(**changes) if changes else p


@pytest.fixture(scope="session")
def base_solution():
    return solve_band(base_params())


@pytest.fixture(scope="session")
def ou_solution():
    return solve_band(ou_params())


@pytest.fixture
def acceptance(request):
    """``record(number, passed, detail)``; lines are echoed in the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
