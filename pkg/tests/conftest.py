import pytest

from ambiport.experiments import default_problem
from ambiport.model import Contract, DiscretePrior
from ambiport.solver import solve_policy

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def problem():
    return default_problem()


@pytest.fixture(scope="session")
def policy(problem):
    return solve_policy(problem)


@pytest.fixture(scope="session")
def merton_problem(problem):
    return problem.replace(contract=Contract.linear_payoff(),
                           prior=DiscretePrior.point_mass(0.078))


@pytest.fixture(scope="session")
def merton_policy(merton_problem):
    return solve_policy(merton_problem)


def record(criterion, passed, detail):
    """Store one acceptance verdict and print it immediately."""
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).split(".")[0]), str(k))):
        terminalreporter.write_line(ACCEPTANCE[key])
