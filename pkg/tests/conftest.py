import numpy as np
import pytest

from fourend.continuation import seed_saddle
from fourend.grid import QuadrantGrid
from fourend.potential import quartic
from fourend.solver import newton_solve


@pytest.fixture(scope="session")
def potential():
    return quartic()


@pytest.fixture(scope="session")
def small_grid():
    return QuadrantGrid(16.0, 0.2)


@pytest.fixture(scope="session")
def small_saddle(small_grid, potential):
    return seed_saddle(small_grid, potential)


@pytest.fixture(scope="session")
def small_tilted(small_grid, potential, small_saddle):
    return newton_solve(small_grid, potential, np.pi / 4 + 0.2, 0.0, small_saddle)


@pytest.fixture(scope="session")
def quartic_table(tmp_path_factory):
    u = np.linspace(-1.2, 1.2, 241)
    path = tmp_path_factory.mktemp("pot") / "quartic.csv"
    rows = np.column_stack([u, 0.25 * (1 - u**2) ** 2, u**3 - u, 3 * u**2 - 1])
    np.savetxt(path, rows, delimiter=",", header="u,F,dF,ddF", comments="", fmt="%.17g")
    return path


ACCEPTANCE = {}


def record(number: int, ok: bool, detail: str) -> bool:
    """Store the outcome of an acceptance criterion for the end-of-run summary."""
    ACCEPTANCE[number] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
