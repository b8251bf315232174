import math
import warnings

import pytest
from scipy.integrate import IntegrationWarning, quad

from primedice.prime_engine import build_sieve

ACCEPTANCE_LINES = []


def is_prime_td(n: int) -> bool:
    """Trial division, the reference primality oracle."""
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


def li_quadrature(x: float) -> float:
    """li(x) by adaptive quadrature of the principal-value integral.

    1/log t = g(t)/(t - 1) with g smooth, so the singularity at t = 1 is
    handled by QUADPACK's Cauchy weight.
    """

    def g(t):
        if t <= 0:
            return 0.0
        if t == 1:
            return 1.0
        return (t - 1) / math.log(t)

    upper = min(x, 2.0)
    # QUADPACK flags roundoff once it is at the double-precision floor
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        head, _ = quad(g, 0, upper, weight="cauchy", wvar=1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
        if x <= 2:
            return head
        body, _ = quad(lambda t: 1 / math.log(t), 2, x, epsabs=1e-13, epsrel=1e-13, limit=1000)
    return head + body


@pytest.fixture(scope="session")
def sieve():
    return build_sieve(2_000_000)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
