import numpy as np
import pytest

from fscil_gacc import AccuracyMatrix, TaskLayout


def random_matrix(rng, n_tasks=None, base=None, novel=None):
    n = int(rng.integers(2, 11)) if n_tasks is None else n_tasks
    base = int(rng.integers(1, 101)) if base is None else base
    novel = int(rng.integers(1, 21)) if novel is None else novel
    arr = rng.uniform(0, 100, (n, n))
    # sprinkle exact 0 / 100 entries
    arr[rng.random((n, n)) < 0.05] = 0.0
    arr[rng.random((n, n)) < 0.05] = 100.0
    return AccuracyMatrix.from_array(TaskLayout(n, base, novel), arr)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
