import numpy as np
import pytest

from svrn.problem import ProblemInstance, Task


def random_instance(n, d, task, gamma=0.0, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    A = scale * rng.standard_normal((n, d))
    if Task(task) is Task.LOGISTIC:
        y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    else:
        y = rng.standard_normal(n)
    return ProblemInstance(A=A, y=y, gamma=gamma, task=task)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[Task.LOGISTIC, Task.LEAST_SQUARES], ids=["logistic", "lsq"])
def task(request):
    return request.param


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the lines are echoed in the terminal summary."""

    def record(number, title, ok, detail):
        line = f"[criterion {number:>2}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
