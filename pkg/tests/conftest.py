import sys

import numpy as np
import pytest

from molia import Scenario, lemma2_region, preset_times, snap
from molia.search import SearchSpec, optimize


@pytest.fixture(scope="session")
def scn():
    return Scenario.table1()


@pytest.fixture(scope="session")
def region(scn):
    return lemma2_region(scn)


@pytest.fixture(scope="session")
def r_special_opt(scn):
    return optimize(SearchSpec("r-special"), scn)


@pytest.fixture(scope="session")
def snapped(scn):
    """Printed optimum rows moved onto the exact feasible set."""
    return {name: snap(scn, preset_times(name), name)[0] for name in ("r-spec", "r-gen", "nr-spec", "nr-gen")}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts, one line per criterion."""
    report = getattr(sys.modules.get("test_acceptance"), "REPORT", None)
    if report:
        terminalreporter.section("acceptance criteria")
        for n in sorted(report):
            terminalreporter.write_line(report[n])
