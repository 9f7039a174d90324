import numpy as np
import pytest

from pspace import KernelRule, PotentialModel, build_eigenset, build_grid


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(96, 20.0)


@pytest.fixture(scope="session")
def small_hydrogen(small_grid):
    """Coarse hydrogen eigenset, l = 0..3. Fast enough for unit tests."""
    return build_eigenset(small_grid, PotentialModel.hydrogen(r_cutoff=60.0), 3, KernelRule())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA_KEY = pytest.StashKey[dict]()


@pytest.fixture
def record_criterion(request):
    """Store a one-line verdict for the acceptance summary."""
    table = request.config.stash.setdefault(_CRITERIA_KEY, {})

    def record(number, title, ok, detail=""):
        table[number] = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}  {detail}".rstrip()
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    table = config.stash.get(_CRITERIA_KEY, None)
    if table:
        terminalreporter.section("acceptance criteria")
        for number in sorted(table):
            terminalreporter.write_line(table[number])
