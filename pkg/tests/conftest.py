import numpy as np
import pytest


def random_psd(rng, n, rank=None, complex_=True):
    rank = rank or n
    a = rng.standard_normal((n, rank))
    if complex_:
        a = a + 1j * rng.standard_normal((n, rank))
    return a @ a.conj().T


def circle_points(rng, n, lo=0.0, hi=2 * np.pi):
    return np.exp(1j * rng.uniform(lo, hi, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


#: criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}
N_CRITERIA = 10


def record(capsys, number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    with capsys.disabled():
        print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        passed, detail = ACCEPTANCE.get(n, (False, "not evaluated"))
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {n}: {detail}")
