import numpy as np
import pytest

from bictele.protocol import InputQubit

S = 1 / np.sqrt(2)


def random_amplitudes(rng, n):
    z = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return z / np.linalg.norm(z)


def random_unitary(rng, k):
    z = rng.normal(size=(2**k, 2**k)) + 1j * rng.normal(size=(2**k, 2**k))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def plus_pair():
    return InputQubit("Alice", S, S), InputQubit("Bob", S, S)


@pytest.fixture
def generic_pair():
    a = np.array([0.3, 0.5 + 0.2j])
    b = np.array([0.6, -0.4j])
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    return InputQubit("Alice", *a), InputQubit("Bob", *b)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary prints them all at the end."""

    def record(number, name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {name} {detail}".rstrip())
        assert ok, f"criterion {number} ({name}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
