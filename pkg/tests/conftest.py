import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(0x5EED)


def random_matrix(rng, n, m=None):
    m = m or n
    return rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))


def random_hermitian(rng, n):
    a = random_matrix(rng, n)
    return (a + a.conj().T) / 2


def close(a, b, tol=1e-9):
    return np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record and print a one-line acceptance outcome."""

    def record(number: int, title: str, passed: bool, detail: str, elapsed: float, budget: float) -> bool:
        ok = passed and elapsed < budget
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail} ({elapsed:.1f}s of {budget:.0f}s)"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
