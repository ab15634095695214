import math

import pytest

from marked_renewal.characterization import CaseDescriptor, make_case_laws

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def case_sweep():
    """Every case across the reference parameter sweep."""
    kappas, thetas, q0s, alphas = (0.0, 0.5, 2.0), (0.5, 1.0, 3.0), (0.2, 0.5, 0.8), (0.5, 1.0, 2.0)
    out = [CaseDescriptor("A")]
    out += [CaseDescriptor("B", kappa=k) for k in kappas]
    out += [CaseDescriptor("C", kappa=k, q0=q) for k in kappas for q in q0s]
    out += [CaseDescriptor("D", kappa=k, theta=t) for k in kappas for t in thetas]
    out += [CaseDescriptor("E", kappa=k, q0=q, alpha=a) for k in kappas for q in q0s for a in alphas]
    return out


@pytest.fixture(scope="session")
def sweep():
    return [(d, *make_case_laws(d)) for d in case_sweep()]


LN2 = math.log(2.0)
