import pytest

from delta_hartree.radial import build_grid
from delta_hartree.riesz import RieszOperator

# grid large enough for unit-mass ground states at p = beta = 2 (width ~100)
PHYSICAL_GRID = dict(r_min=1e-6, r_max=1000.0, n=4096)

_ACCEPTANCE_LINES = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="session")
def grid():
    return build_grid()


@pytest.fixture(scope="session")
def op2(grid):
    return RieszOperator.build(2.0, grid)


@pytest.fixture(scope="session")
def physical_grid():
    return build_grid(**PHYSICAL_GRID)


@pytest.fixture(scope="session")
def physical_op(physical_grid):
    return RieszOperator.build(2.0, physical_grid)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
