import pytest

from pooltest import enumeration, zones

# filled by tests/test_acceptance.py; echoed after the run so the
# per-criterion lines survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

# Reference trees, transcribed once and reused across the suite.
# n=2, pool first, then sample 1:
POOL_LEFT_2 = "P{1,2}[L(00),P{1}[L(01),P{2}[L(10),L(11)]]]"
# n=2, pool first, then sample 2:
POOL_RIGHT_2 = "P{1,2}[L(00),P{2}[L(10),P{1}[L(01),L(11)]]]"
# n=3 chain that is optimal at (0.01, 0.17, 0.51):
CHAIN_3 = (
    "P{1,2,3}[L(000),P{1,2}[L(001),P{1,3}[L(010),P{1}[L(011),"
    "P{2,3}[L(100),P{2}[L(101),P{3}[L(110),L(111)]]]]]]]"
)
# what the information-greedy heuristic builds at the same point:
GREEDY_3 = (
    "P{1,2,3}[L(000),P{1,2}[L(001),P{1}[P{3}[L(010),L(011)],"
    "P{2,3}[L(100),P{2}[L(101),P{3}[L(110),L(111)]]]]]]"
)
HARD_POINT = (0.01, 0.17, 0.51)


@pytest.fixture(scope="session")
def procedures_by_n():
    return {n: tuple(enumeration.enumerate_procedures(n)) for n in (1, 2, 3)}


@pytest.fixture(scope="session")
def zonemap2():
    return zones.compute_metaprocedure(2)


@pytest.fixture(scope="session")
def zonemap3():
    return zones.compute_metaprocedure(3)
