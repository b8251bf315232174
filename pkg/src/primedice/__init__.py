"""Expected number of rolls of an M-sided die until the running total is prime."""
from .prime_engine import (
    BoundReport,
    CapacityError,
    SieveTable,
    TargetSet,
    build_sieve,
    count_primes_in_window,
    log_integral,
    prime_pi,
)
from .stopping_dp import (
    ExpectationResult,
    StoppingDistribution,
    enumerate_exact,
    expectation,
    run_dp,
    tail_bound_rigorous,
)

__all__ = [
    "BoundReport",
    "CapacityError",
    "ExpectationResult",
    "SieveTable",
    "StoppingDistribution",
    "TargetSet",
    "build_sieve",
    "count_primes_in_window",
    "enumerate_exact",
    "expectation",
    "log_integral",
    "prime_pi",
    "run_dp",
    "tail_bound_rigorous",
]
