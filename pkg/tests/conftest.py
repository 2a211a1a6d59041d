import numpy as np
import pytest

H = 1e-5


def numeric_grad(f, x: np.ndarray, h: float = H) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x`` (``x`` is perturbed in place and restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def grad_close(analytic, numeric, abs_tol=1e-4, rel_tol=1e-3) -> bool:
    analytic = np.zeros_like(numeric) if analytic is None else analytic
    err = np.abs(analytic - numeric)
    return bool(np.all(err <= np.maximum(abs_tol, rel_tol * np.abs(numeric))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines, printed at the end of every session that ran them
ACCEPTANCE: list[str] = []


def report(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE.append(f"{'PASS' if passed else 'FAIL'}  criterion {number}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
