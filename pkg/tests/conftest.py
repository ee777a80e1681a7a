import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sgmtl.core import Problem, TaskDataset

settings.register_profile(
    "sgmtl",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("sgmtl")


def random_problem(rng, m=3, n=8, d=4, logistic=False, noise=0.3):
    tasks = []
    for t in range(m):
        X = rng.standard_normal((n, d))
        w = rng.standard_normal(d)
        z = X @ w + noise * rng.standard_normal(n)
        if logistic:
            y = np.where(z >= 0, 1.0, -1.0)
            kind = "logistic"
        else:
            y = z
            kind = "squared"
        tasks.append(TaskDataset(X, y, kind, f"t{t}"))
    return Problem(tuple(tasks))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_problem(rng):
    return random_problem(rng)


# acceptance results, filled by tests/test_acceptance.py and printed at the end
ACCEPTANCE = {}


def record_acceptance(key, passed, detail):
    ACCEPTANCE[key] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {key}: {detail}")
