import numpy as np
import pytest

from treeclosure.bnb import solve_bnb
from treeclosure.model import GeneratorConfig, generate_mkp, generate_scp
from treeclosure.oracle import enumerate_feasible
from treeclosure.tree import complete_tree


@pytest.fixture(scope="session")
def mkp10():
    return generate_mkp(GeneratorConfig(n=10, seed=1))


@pytest.fixture(scope="session")
def mkp10_tree(mkp10):
    return complete_tree(solve_bnb(mkp10))


@pytest.fixture(scope="session")
def mkp10_enum(mkp10):
    return enumerate_feasible(mkp10)


@pytest.fixture(scope="session")
def small_mkp():
    """n=6 knapsack with a handful of nodes, cheap enough for exhaustive checks."""
    return generate_mkp(GeneratorConfig(n=6, seed=3))


@pytest.fixture(scope="session")
def small_tree(small_mkp):
    return complete_tree(solve_bnb(small_mkp))


@pytest.fixture(scope="session")
def scp14():
    return generate_scp(GeneratorConfig(n=14, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" not in getattr(rep, "nodeid", ""):
                continue
            number = int(rep.nodeid.split("test_criterion_")[1][:2])
            detail = dict(getattr(rep, "user_properties", ())).get("acceptance", "")
            status = "PASS" if outcome == "passed" else "FAIL"
            if number not in lines or status == "FAIL":
                lines[number] = f"criterion {number:2d}: {status}  {detail}".rstrip()
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
