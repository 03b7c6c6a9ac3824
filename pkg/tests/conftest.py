import hypothesis
import numpy as np
import pytest

from stochsand.rng import make_rng

hypothesis.settings.register_profile("default", deadline=None, max_examples=50)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")

ACCEPTANCE = []


@pytest.fixture
def rng(request):
    # one stream per test, stable across runs and test ordering
    key = sum(ord(c) * (i + 1) for i, c in enumerate(request.node.name)) % 2**31
    return make_rng(12345, key)


@pytest.fixture
def criterion():
    def record(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        print(line)
        ACCEPTANCE.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


def binomial_z(count, total, p):
    """z-score of an observed count against Binomial(total, p)."""
    sd = np.sqrt(total * p * (1 - p))
    return (count - total * p) / sd if sd > 0 else (0.0 if count == total * p else np.inf)
