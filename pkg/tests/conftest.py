import numpy as np
import pytest


def smooth_field(rng, offset=0.0):
    """A random smooth function of (x, y)."""
    p = rng.uniform(-1, 1, 6)

    def f(x, y):
        return offset + p[0] + p[1] * np.sin(2 * x + p[2]) * np.cos(3 * y + p[3]) + p[4] * x * y**2 + p[5] * np.exp(x - y)

    return f


def random_coefficients(rng):
    """Symmetric positive a, arbitrary b and c, all smooth."""
    a12 = smooth_field(rng)
    a = [[smooth_field(rng, 6.0), a12], [a12, smooth_field(rng, 6.0)]]
    b = [smooth_field(rng), smooth_field(rng)]
    return a, b, smooth_field(rng)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
