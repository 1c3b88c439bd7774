import numpy as np
import pytest

import heatlattice as hl


@pytest.fixture(scope="session")
def interval_10():
    """Unit interval at scale 10: sites 1..9, bath {0, 10}."""
    return hl.build_lattice(hl.DomainSpec.interval(0.0, 1.0), 10.0)


@pytest.fixture(scope="session")
def square_8():
    """Unit square at scale 8: 7x7 interior sites."""
    return hl.build_lattice(
        hl.DomainSpec.rectangle([(0.0, 1.0), (0.0, 1.0)]), 8.0
    )


@pytest.fixture()
def rng():
    return hl.Rng.from_seed(20240817, 0)


def exact_split_probability(n: int, carried: int) -> float:
    """P(the particle carries a given set of `carried` packets out of n)."""
    from math import factorial

    return factorial(carried) * factorial(n - carried) / factorial(n + 1)


@pytest.fixture(scope="session")
def split_prob():
    return exact_split_probability


def assert_close(actual, expected, rel=0.0, abs_=0.0, msg=""):
    tol = max(abs_, rel * abs(expected))
    assert abs(actual - expected) <= tol, (
        f"{msg}: {actual} vs {expected} (tol {tol})"
    )


@pytest.fixture(scope="session")
def close():
    return assert_close


# one summary line per acceptance check, printed after the run
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, ok, detail))


@pytest.fixture(scope="session")
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance checks")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {name}: {detail}")
