"""Segmented prime sieve, prime counting, the logarithmic integral, and
checkable predicates for the classical prime-counting bounds.

The sieve is stored as a dense boolean array together with cumulative counts
at a fixed stride, so that ``prime_pi`` costs one lookup plus a count over at
most ``PI_STRIDE`` entries.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

PI_STRIDE = 1 << 16
DEFAULT_SEGMENT = 1 << 20
# one byte per entry; 4e9 entries is already 4 GB
DEFAULT_MAX_LIMIT = 4_000_000_000

EULER_GAMMA = 0.57721566490153286061


class CapacityError(ValueError):
    """Raised when a request exceeds a configured size budget."""


# ---------------------------------------------------------------------------
# sieve
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SieveTable:
    limit: int
    is_prime: np.ndarray
    pi_checkpoints: np.ndarray
    stride: int = PI_STRIDE

    @cached_property
    def primes(self) -> np.ndarray:
        """All primes <= limit, ascending (int64)."""
        return np.flatnonzero(self.is_prime).astype(np.int64)

    def __len__(self) -> int:
        return self.limit + 1


def _small_primes(n: int) -> np.ndarray:
    if n < 2:
        return np.empty(0, dtype=np.int64)
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags).astype(np.int64)


def _sieve_segment(out: np.ndarray, lo: int, hi: int, base: np.ndarray) -> None:
    # out is the view is_prime[lo:hi]
    out[:] = True
    if lo < 2:
        out[: 2 - lo] = False
    for p in base.tolist():
        sq = p * p
        if sq >= hi:
            break
        start = max(sq, -(-lo // p) * p)
        out[start - lo :: p] = False


def build_sieve(
    limit: int,
    segment_size: int = DEFAULT_SEGMENT,
    threads: int = 1,
    max_limit: int = DEFAULT_MAX_LIMIT,
) -> SieveTable:
    """Sieve of Eratosthenes over ``[0, limit]``, one segment at a time.

    Working memory beyond the output bitmap is the base-prime list up to
    ``sqrt(limit)``. Segments are independent, so ``threads > 1`` only changes
    scheduling, never the result.
    """
    limit = int(limit)
    if limit < 0:
        raise ValueError(f"limit must be >= 0, got {limit}")
    if limit > max_limit:
        raise CapacityError(f"sieve limit {limit} exceeds budget {max_limit}")
    if segment_size < 1:
        raise ValueError("segment_size must be positive")

    is_prime = np.empty(limit + 1, dtype=bool)
    base = _small_primes(math.isqrt(limit))
    bounds = [(lo, min(lo + segment_size, limit + 1)) for lo in range(0, limit + 1, segment_size)]

    def work(span: tuple[int, int]) -> None:
        lo, hi = span
        _sieve_segment(is_prime[lo:hi], lo, hi, base)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, bounds))
    else:
        for span in bounds:
            work(span)

    is_prime.setflags(write=False)
    return SieveTable(limit=limit, is_prime=is_prime, pi_checkpoints=_checkpoints(is_prime))


def _checkpoints(is_prime: np.ndarray, stride: int = PI_STRIDE) -> np.ndarray:
    # cp[i] = number of primes strictly below i * stride
    n_blocks = -(-len(is_prime) // stride)
    padded = np.zeros(n_blocks * stride, dtype=bool)
    padded[: len(is_prime)] = is_prime
    per_block = padded.reshape(n_blocks, stride).sum(axis=1, dtype=np.int64)
    cp = np.zeros(n_blocks + 1, dtype=np.int64)
    np.cumsum(per_block, out=cp[1:])
    return cp


def _check_range(table: SieveTable, x: int, what: str = "x") -> None:
    if x < 0 or x > table.limit:
        raise ValueError(f"{what}={x} outside sieve range [0, {table.limit}]")


def prime_pi(table: SieveTable, x: int) -> int:
    """Number of primes <= x."""
    x = int(x)
    _check_range(table, x)
    block = x // table.stride
    base = block * table.stride
    return int(table.pi_checkpoints[block]) + int(np.count_nonzero(table.is_prime[base : x + 1]))


def prime_pi_many(table: SieveTable, xs) -> np.ndarray:
    """Vectorised prime_pi for an array of arguments."""
    xs = np.asarray(xs, dtype=np.int64)
    if xs.size and (xs.min() < 0 or xs.max() > table.limit):
        raise ValueError(f"arguments outside sieve range [0, {table.limit}]")
    return np.searchsorted(table.primes, xs, side="right").astype(np.int64)


def count_primes_in_window(table: SieveTable, k: int, M: int) -> int:
    """Number of primes p with k < p <= k + M."""
    if k < 0 or M < 1:
        raise ValueError(f"need k >= 0 and M >= 1, got k={k}, M={M}")
    _check_range(table, k + M, "k+M")
    return prime_pi(table, k + M) - prime_pi(table, k)


# ---------------------------------------------------------------------------
# logarithmic integral
# ---------------------------------------------------------------------------


def _ei_series(y: float) -> float:
    # Ei(y) = gamma + ln|y| + sum_{n>=1} y^n / (n * n!)
    terms = []
    t = 1.0
    for n in range(1, 2000):
        t *= y / n
        terms.append(t / n)
        if abs(t) < 1e-18 * abs(terms[0]) and n > abs(y):
            break
    return EULER_GAMMA + math.log(abs(y)) + math.fsum(terms)


def _e1_continued_fraction(z: float) -> float:
    # modified Lentz on E1(z) = e^-z / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))
    tiny = 1e-300
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-z)


def exp_integral_ei(y: float) -> float:
    """Exponential integral Ei(y) for real y != 0 (principal value)."""
    if y == 0:
        raise ValueError("Ei diverges at 0")
    if y > -2.0:
        return _ei_series(y)
    return -_e1_continued_fraction(-y)


def log_integral(x: float) -> float:
    """li(x), the principal-value integral of 1/log t from 0 to x.

    Evaluated as Ei(log x). li(0) = 0; x = 1 is rejected.
    """
    if x < 0:
        raise ValueError(f"li undefined for x={x} < 0")
    if x == 0:
        return 0.0
    if x == 1:
        raise ValueError("li(1) is -infinity")
    return exp_integral_ei(math.log(x))


# ---------------------------------------------------------------------------
# bound predicates
# ---------------------------------------------------------------------------


class Violation(NamedTuple):
    input: int
    lhs: float
    rhs: float
    note: str = ""


@dataclass
class BoundReport:
    bound_name: str
    samples_checked: int = 0
    violations: list[Violation] = field(default_factory=list)
    # failures the caller has declared out of scope (below an assumed constant)
    waived: list[Violation] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def merge(self, other: "BoundReport") -> "BoundReport":
        return BoundReport(
            bound_name=self.bound_name,
            samples_checked=self.samples_checked + other.samples_checked,
            violations=self.violations + other.violations,
            waived=self.waived + other.waived,
            notes=self.notes + other.notes,
        )

    def to_dict(self, max_items: int = 50) -> dict:
        return {
            "bound_name": self.bound_name,
            "samples_checked": self.samples_checked,
            "passed": self.passed,
            "n_violations": len(self.violations),
            "violations": [v._asdict() for v in self.violations[:max_items]],
            "n_waived": len(self.waived),
            "waived": [v._asdict() for v in self.waived[:max_items]],
            "notes": list(self.notes),
        }


def check_rosser_schoenfeld(table: SieveTable, xs: Iterable[int]) -> BoundReport:
    """pi(x) < x/(log x - 1.5) for x >= 5 and pi(x) > x/log x for x >= 17."""
    xs = np.asarray(list(xs) if not isinstance(xs, np.ndarray) else xs, dtype=np.int64)
    if xs.size and xs.min() < 5:
        raise ValueError("Rosser-Schoenfeld bounds need x >= 5")
    pis = prime_pi_many(table, xs)
    logs = np.log(xs.astype(float))
    upper = xs / (logs - 1.5)
    report = BoundReport("rosser-schoenfeld", samples_checked=int(xs.size))
    for i in np.flatnonzero(~(pis < upper)):
        report.violations.append(Violation(int(xs[i]), float(pis[i]), float(upper[i]), "upper"))
    big = xs >= 17
    lower = np.where(big, xs / logs, 0.0)
    for i in np.flatnonzero(big & ~(pis > lower)):
        report.violations.append(Violation(int(xs[i]), float(pis[i]), float(lower[i]), "lower"))
    return report


def check_pi_li_gap(table: SieveTable, xs: Iterable[int], threshold: int = 0) -> BoundReport:
    """|pi(x) - li(x)| < x / (2 (log x)^5).

    Only claimed for x beyond some unspecified constant, so failures at
    x < threshold go to ``waived`` instead of ``violations``.
    """
    report = BoundReport("pi-li-gap")
    for x in xs:
        x = int(x)
        if x < 2:
            raise ValueError("pi-li gap needs x >= 2")
        gap = abs(prime_pi(table, x) - log_integral(x))
        rhs = x / (2.0 * math.log(x) ** 5)
        report.samples_checked += 1
        if not gap < rhs:
            if x < threshold:
                report.waived.append(Violation(x, gap, rhs, "below caller's assumed C"))
            else:
                report.violations.append(Violation(x, gap, rhs))
    return report


def interval_bounds(M: int) -> tuple[float, float | None]:
    """(lower, upper) window bounds M/(log M + 4 log log M), M/(log M - 4 log log M).

    The upper bound is None when its denominator is not positive.
    """
    lm = math.log(M)
    llm = math.log(lm)
    lower = M / (lm + 4 * llm)
    den = lm - 4 * llm
    return lower, (M / den if den > 0 else None)


def check_interval_lemma(table: SieveTable, M: int, k_samples: Iterable[int]) -> BoundReport:
    """Window counts pi(k+M) - pi(k) against both interval bounds.

    Valid ranges are 0 <= k <= M (log M)^3. Failures are reported, not raised:
    the bounds are only claimed for sufficiently large M.
    """
    if M < 3:
        raise ValueError("interval bounds need M >= 3")
    k_max = M * math.log(M) ** 3
    lower, upper = interval_bounds(M)
    report = BoundReport(f"interval-lemma(M={M})")
    if upper is None:
        report.notes.append("upper bound not applicable: log M - 4 log log M <= 0")
    for k in k_samples:
        k = int(k)
        if k < 0 or k > k_max:
            raise ValueError(f"k={k} outside [0, M (log M)^3]")
        c = count_primes_in_window(table, k, M)
        report.samples_checked += 1
        if c < lower:
            report.violations.append(Violation(k, c, lower, "lower"))
        if upper is not None and c > upper:
            report.violations.append(Violation(k, c, upper, "upper"))
    return report


def check_s_ell_containment(table: SieveTable, ells: Iterable[int]) -> BoundReport:
    """{k : pi(k) = ell} lies inside [ell + 1, ell^2 - 1]."""
    report = BoundReport("s-ell-containment")
    primes = table.primes
    for ell in ells:
        ell = int(ell)
        if ell < 3:
            raise ValueError("containment is only claimed for ell >= 3")
        _check_range(table, ell * ell, "ell^2")
        report.samples_checked += 1
        # S_ell = [p_ell, p_{ell+1} - 1]
        lo = int(primes[ell - 1])
        if lo <= ell:
            report.violations.append(Violation(ell, lo, ell + 1, "min"))
        if prime_pi(table, ell * ell) < ell + 1:
            hi = int(primes[ell]) - 1 if ell < len(primes) else table.limit
            report.violations.append(Violation(ell, hi, ell * ell - 1, "max"))
    return report


# ---------------------------------------------------------------------------
# target sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TargetSet:
    """Set of stopping sums: primes (default), perfect squares, or a fixed list."""

    kind: str
    limit: int
    sieve: SieveTable | None = None
    values: np.ndarray | None = None

    @classmethod
    def primes(cls, sieve: SieveTable | int) -> "TargetSet":
        if not isinstance(sieve, SieveTable):
            sieve = build_sieve(sieve)
        return cls("primes", sieve.limit, sieve=sieve)

    @classmethod
    def squares(cls, limit: int) -> "TargetSet":
        return cls("squares", int(limit))

    @classmethod
    def custom(cls, values: Sequence[int], limit: int | None = None) -> "TargetSet":
        arr = np.unique(np.asarray(values, dtype=np.int64))
        if arr.size and arr[0] < 1:
            raise ValueError("custom targets must be positive integers")
        if limit is None:
            limit = int(arr[-1]) if arr.size else 0
        return cls("custom", int(limit), values=arr[arr <= limit])

    def contains(self, n: int) -> bool:
        return target_membership(self, n)

    def members_between(self, lo: int, hi: int) -> np.ndarray:
        """Ascending int64 array of members in [lo, hi]."""
        lo = max(int(lo), 1)
        hi = int(hi)
        if hi > self.limit:
            raise CapacityError(f"target set covers [1, {self.limit}], asked for {hi}")
        if hi < lo:
            return np.empty(0, dtype=np.int64)
        if self.kind == "primes":
            p = self.sieve.primes
            return p[np.searchsorted(p, lo) : np.searchsorted(p, hi, side="right")]
        if self.kind == "squares":
            a = math.isqrt(lo - 1) + 1
            b = math.isqrt(hi)
            return np.arange(a, b + 1, dtype=np.int64) ** 2
        v = self.values
        return v[np.searchsorted(v, lo) : np.searchsorted(v, hi, side="right")]

    def extended(self, limit: int) -> "TargetSet":
        """Same kind, covering at least ``limit``."""
        if limit <= self.limit:
            return self
        if self.kind == "primes":
            return TargetSet.primes(build_sieve(limit))
        if self.kind == "squares":
            return TargetSet.squares(limit)
        raise CapacityError("a custom target list cannot be extended")


def target_membership(target: TargetSet, n: int) -> bool:
    n = int(n)
    if n < 1 or n > target.limit:
        raise ValueError(f"n={n} outside target range [1, {target.limit}]")
    if target.kind == "primes":
        return bool(target.sieve.is_prime[n])
    if target.kind == "squares":
        r = math.isqrt(n)
        return r * r == n
    i = np.searchsorted(target.values, n)
    return bool(i < len(target.values) and target.values[i] == n)
