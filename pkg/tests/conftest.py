import numpy as np
import pytest

from grin.tensor import Rng


@pytest.fixture
def rng():
    return Rng(1234)


def loop_stats(x, eps):
    """Explicit double-loop per-channel mean and eps-guarded std."""
    n, c, h, w = x.shape
    mean = np.zeros((n, c))
    std = np.zeros((n, c))
    for i in range(n):
        for j in range(c):
            s = 0.0
            for a in range(h):
                for b in range(w):
                    s += x[i, j, a, b]
            m = s / (h * w)
            v = 0.0
            for a in range(h):
                for b in range(w):
                    v += (x[i, j, a, b] - m) ** 2
            mean[i, j] = m
            std[i, j] = np.sqrt(v / (h * w) + eps)
    return mean, std


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, title, ok, detail)."""
    def record(number, title, ok, detail=""):
        ACCEPTANCE.append((number, title, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
