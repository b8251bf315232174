"""Exact dynamic program for the prime-hitting stopping round.

State after round r is the survivor mass Pr(r, k) over sums k: the probability
that no partial sum so far hit the target set and the current sum is k. One
round spreads each entry uniformly over the next M sums (a length-M sliding
window), then removes the mass that landed on targets.

Two arithmetic modes:

* float: binary64, compiled running-window sums with compensated
  accumulation and a deferred scale factor (stored values times ``scale`` are
  probabilities) so that the per-round division by M is free;
* exact: Python integers counting tuples, so Pr(r, k) = count / M**r, with the
  window taken as a difference of prefix sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from ._kernels import take_targets, window_pass
from .prime_engine import (
    BoundReport,
    CapacityError,
    SieveTable,
    TargetSet,
    Violation,
    build_sieve,
    prime_pi,
    prime_pi_many,
)

# smallest positive normal binary64; stored entries below this are flushed
FLUSH_FLOOR = 2.2250738585072014e-308
RENORM_ABOVE = 1e200
DEFAULT_ROUNDS = 50
DEFAULT_EPS = 1e-9
DEFAULT_ROUND_CAP = 10_000
ENUMERATION_BUDGET = 10**7


class TailBoundUnavailable(ValueError):
    pass


@dataclass
class RoundState:
    """Survivor mass after ``round`` rolls; ``mass[i]`` is Pr(round, offset + i).

    In exact mode the entries are integer tuple counts and the probability is
    ``mass[i] / faces**round``.
    """

    faces: int
    round: int
    offset: int
    mass: np.ndarray
    exact: bool = False

    @property
    def sums(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self.mass), dtype=np.int64)

    def probability(self, k: int):
        i = k - self.offset
        if i < 0 or i >= len(self.mass):
            return Fraction(0) if self.exact else 0.0
        if self.exact:
            return Fraction(int(self.mass[i]), self.faces**self.round)
        return float(self.mass[i])

    def total(self):
        if self.exact:
            return Fraction(int(sum(self.mass.tolist())), self.faces**self.round)
        return float(np.sum(self.mass))


@dataclass
class StoppingDistribution:
    """pr_hit[r-1] = Pr_P(r) for r = 1..R, pr_survive[r] = Pr_N(r) for r = 0..R."""

    faces: int
    rounds: int
    pr_hit: list
    pr_survive: list
    target_kind: str = "primes"
    exact: bool = False
    lost_mass: float = 0.0

    def expectation_truncated(self):
        if self.exact:
            return sum((r * p for r, p in enumerate(self.pr_hit, start=1)), Fraction(0))
        return math.fsum(r * p for r, p in enumerate(self.pr_hit, start=1))


@dataclass
class ExpectationResult:
    faces: int
    rounds_used: int
    expectation_truncated: float
    survivor_mass: float
    tail_estimate: float
    expectation_total: float
    mode: str
    status: str
    tail_bound_rigorous: float | None = None
    lost_mass: float = 0.0
    target_kind: str = "primes"
    distribution: StoppingDistribution | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "faces": self.faces,
            "rounds_used": self.rounds_used,
            "expectation_truncated": self.expectation_truncated,
            "survivor_mass": self.survivor_mass,
            "tail_estimate": self.tail_estimate,
            "tail_is_estimate": True,
            "tail_bound_rigorous": self.tail_bound_rigorous,
            "expectation_total": self.expectation_total,
            "mode": self.mode,
            "status": self.status,
            "lost_mass": self.lost_mass,
            "target": self.target_kind,
        }


@dataclass
class ExactTally:
    faces: int
    rounds: int
    counts_hit: list[int]
    counts_survive: dict[tuple[int, int], int]

    def pr_hit(self) -> list[Fraction]:
        return [Fraction(c, self.faces**r) for r, c in enumerate(self.counts_hit, start=1)]

    def pr_survive(self) -> list[Fraction]:
        out = [Fraction(1)]
        for r in range(1, self.rounds + 1):
            n = sum(c for (rr, _), c in self.counts_survive.items() if rr == r)
            out.append(Fraction(n, self.faces**r))
        return out


# ---------------------------------------------------------------------------
# transition kernel
# ---------------------------------------------------------------------------


def _window_sums(old: np.ndarray, M: int, prefix: np.ndarray, out: np.ndarray) -> None:
    """out[j] = sum of old[i] for j-M < i <= j, for j = 0 .. n+M-2.

    ``prefix`` needs length >= n+1 and ``out`` exactly n+M-1.
    """
    n = len(old)
    c = prefix[: n + 1]
    c[0] = 0
    np.cumsum(old, out=c[1:])
    a = min(n, M)
    out[:a] = c[1 : a + 1]
    if n > M:
        np.subtract(c[M + 1 : n + 1], c[1 : n - M + 1], out=out[M:n])
    elif M > n:
        out[n:M] = c[n]
    lo = max(n, M)
    if lo <= n + M - 2:
        np.subtract(c[n], c[lo + 1 - M : n], out=out[lo : n + M - 1])


def _members(target: TargetSet, lo: int, hi: int) -> np.ndarray:
    if hi > target.limit:
        raise CapacityError(f"target set covers sums up to {target.limit}, round needs {hi}")
    return target.members_between(lo, hi)


def _resolve_target(
    target: TargetSet | None, sieve: SieveTable | None, needed: int
) -> TargetSet:
    if target is None:
        if sieve is None:
            sieve = build_sieve(max(needed, 2))
        target = TargetSet.primes(sieve)
    return target


def initial_state(M: int, exact: bool = False) -> RoundState:
    """Round 0: unit mass at sum 0."""
    if M < 1:
        raise ValueError(f"number of faces must be >= 1, got {M}")
    mass = np.array([1], dtype=object) if exact else np.array([1.0])
    return RoundState(faces=M, round=0, offset=0, mass=mass, exact=exact)


def advance_round(state: RoundState, target: TargetSet | None = None, sieve: SieveTable | None = None):
    """One roll: returns (next survivor state, Pr_P(round + 1)).

    Allocates fresh arrays; ``run_dp`` reuses buffers instead.
    """
    M = state.faces
    top = state.offset + len(state.mass) - 1 + M
    if target is None:
        if sieve is None:
            raise ValueError("need a target set or a sieve")
        target = TargetSet.primes(sieve)
    if top > target.limit:
        raise CapacityError(f"sieve/target limit {target.limit} < {top} needed for round {state.round + 1}")

    n = len(state.mass)
    offset = state.offset + 1
    if n == 0:
        empty = state.mass[:0].copy()
        zero = Fraction(0) if state.exact else 0.0
        return RoundState(M, state.round + 1, offset, empty, state.exact), zero

    if state.exact:
        prefix = np.empty(n + 1, dtype=object)
        new = np.empty(n + M - 1, dtype=object)
        _window_sums(state.mass, M, prefix, new)
        idx = _members(target, offset, offset + len(new) - 1) - offset
        hit_count = int(sum(new[idx].tolist()))
        new[idx] = 0
        hit = Fraction(hit_count, M ** (state.round + 1))
    else:
        new = np.empty(n + M - 1)
        window_pass(np.ascontiguousarray(state.mass, dtype=np.float64), M, new)
        new /= M
        idx = _members(target, offset, offset + len(new) - 1) - offset
        hit = take_targets(new, idx)
    return RoundState(M, state.round + 1, offset, new, state.exact), hit


# ---------------------------------------------------------------------------
# buffered float engine
# ---------------------------------------------------------------------------


def _trim_edges(mass: np.ndarray, floor: float, block: int = 4096) -> tuple[int, int]:
    """Index range [lo, hi) outside of which every entry is below ``floor``."""
    n = len(mass)
    lo = 0
    while lo < n:
        nz = np.flatnonzero(mass[lo : lo + block] >= floor)
        if nz.size:
            lo += int(nz[0])
            break
        lo += block
    else:
        return 0, 0
    hi = n
    while hi > lo:
        start = max(lo, hi - block)
        nz = np.flatnonzero(mass[start:hi] >= floor)
        if nz.size:
            hi = start + int(nz[-1]) + 1
            break
        hi = start
    return lo, hi


class _FloatEngine:
    """Round-by-round float propagation over reusable buffers.

    Probabilities are ``stored * scale``; the window kernel skips the 1/M
    factor and folds it into ``scale`` instead. Stored entries that would be
    subnormal are trimmed off the edges and counted in ``lost``.
    """

    def __init__(self, M: int, target: TargetSet, grow_target: bool = False):
        if M < 1:
            raise ValueError(f"number of faces must be >= 1, got {M}")
        self.M = M
        self.target = target
        self.grow_target = grow_target
        self.round = 0
        self.offset = 0
        self.scale = 1.0
        self.stored_total = 1.0
        self.lost = 0.0
        self._bufs = [np.empty(1024), np.empty(1024)]
        self._which = 0
        self._bufs[0][0] = 1.0
        self.mass = self._bufs[0][:1]

    @property
    def survivor(self) -> float:
        return self.stored_total * self.scale

    def _ensure(self, n_new: int) -> None:
        other = 1 - self._which
        if len(self._bufs[other]) < n_new:
            self._bufs[other] = np.empty(max(n_new, 2 * len(self._bufs[other])))

    def step(self) -> float:
        """Advance one round; returns Pr_P(round)."""
        M = self.M
        n = len(self.mass)
        self.round += 1
        self.offset += 1
        if n == 0 or self.stored_total == 0.0:
            self.mass = self.mass[:0]
            self.stored_total = 0.0
            return 0.0
        n_new = n + M - 1
        top = self.offset + n_new - 1
        if top > self.target.limit:
            if not self.grow_target:
                raise CapacityError(
                    f"target limit {self.target.limit} < {top} needed for round {self.round}"
                )
            self.target = self.target.extended(max(top, 2 * self.target.limit))
        self._ensure(n_new)
        other = 1 - self._which
        new = self._bufs[other][:n_new]
        window_pass(self.mass, M, new)
        self._which = other
        self.scale /= M

        idx = _members(self.target, self.offset, top) - self.offset
        hit_stored = take_targets(new, idx)
        # every old entry feeds exactly M new sums
        total = M * self.stored_total - hit_stored

        lo, hi = _trim_edges(new, FLUSH_FLOOR)
        if lo > 0 or hi < n_new:
            dropped = float(np.sum(new[:lo])) + float(np.sum(new[hi:]))
            total -= dropped
            self.lost += dropped * self.scale
            self.offset += lo
            new = new[lo:hi]
        self.mass = new
        self.stored_total = max(total, 0.0) if len(new) else 0.0
        hit = hit_stored * self.scale

        if self.stored_total > RENORM_ABOVE or (0.0 < self.stored_total < 1e-200):
            f = self.stored_total
            new /= f
            self.scale *= f
            self.stored_total = 1.0
        return hit

    def state(self) -> RoundState:
        return RoundState(self.M, self.round, self.offset, self.mass * self.scale)


def iter_states(
    M: int,
    R: int,
    target: TargetSet | None = None,
    sieve: SieveTable | None = None,
    exact: bool = False,
) -> Iterator[tuple[RoundState, object]]:
    """Yield (state after round r, Pr_P(r)) for r = 1..R."""
    target = _resolve_target(target, sieve, M * R)
    if exact:
        state = initial_state(M, exact=True)
        for _ in range(R):
            state, hit = advance_round(state, target)
            yield state, hit
        return
    eng = _FloatEngine(M, target)
    for _ in range(R):
        hit = eng.step()
        yield eng.state(), hit


def run_dp(
    M: int,
    R: int,
    target: TargetSet | None = None,
    sieve: SieveTable | None = None,
    exact: bool = False,
) -> StoppingDistribution:
    """Per-round hit and survivor probabilities through round R."""
    if R < 1:
        raise ValueError("R must be >= 1")
    if M < 1:
        raise ValueError(f"number of faces must be >= 1, got {M}")
    target = _resolve_target(target, sieve, M * R)
    if exact:
        hits = []
        surv = [Fraction(1)]
        for state, hit in iter_states(M, R, target, exact=True):
            hits.append(hit)
            surv.append(state.total())
        return StoppingDistribution(M, R, hits, surv, target.kind, exact=True)
    eng = _FloatEngine(M, target)
    hits, surv = [], [1.0]
    for _ in range(R):
        hits.append(eng.step())
        surv.append(eng.survivor)
    return StoppingDistribution(M, R, hits, surv, target.kind, lost_mass=eng.lost)


# ---------------------------------------------------------------------------
# expectation and tails
# ---------------------------------------------------------------------------


def geometric_tail(prev_survivor: float, survivor: float, R: int) -> float:
    """Tail sum over r > R of r Pr_P(r), assuming survivors keep shrinking by
    the last observed ratio q: survivor * ((R + 1) + q / (1 - q))."""
    if survivor == 0.0 or prev_survivor == 0.0:
        return 0.0
    q = survivor / prev_survivor
    if q > 1.0 + 1e-12:
        raise RuntimeError(f"survivor mass increased between rounds (ratio {q})")
    q = min(max(q, 0.0), 1.0 - 1e-12)
    return survivor * ((R + 1) + q / (1.0 - q))


def tail_estimate(dist: StoppingDistribution) -> float:
    R = dist.rounds
    return geometric_tail(float(dist.pr_survive[R - 1]), float(dist.pr_survive[R]), R)


def expectation(
    M: int,
    rounds: int | None = DEFAULT_ROUNDS,
    *,
    eps: float = DEFAULT_EPS,
    target: TargetSet | None = None,
    sieve: SieveTable | None = None,
    max_rounds: int = DEFAULT_ROUND_CAP,
    rigorous: bool = False,
) -> ExpectationResult:
    """Expected stopping round, truncated at ``rounds`` plus a geometric tail.

    ``rounds=None`` selects auto mode: keep rolling until the tail estimate
    drops below ``eps`` or ``max_rounds`` is reached (status ``cap-reached``).
    In auto mode the target set is extended on demand.
    """
    if M < 1:
        raise ValueError(f"number of faces must be >= 1, got {M}")
    auto = rounds is None
    if auto:
        if eps <= 0:
            raise ValueError("eps must be positive")
        guess = M * 64
        target = _resolve_target(target, sieve, guess)
        eng = _FloatEngine(M, target, grow_target=True)
        hits, surv = [], [1.0]
        status = "cap-reached"
        while eng.round < max_rounds:
            hits.append(eng.step())
            surv.append(eng.survivor)
            if geometric_tail(surv[-2], surv[-1], eng.round) < eps:
                status = "converged"
                break
        dist = StoppingDistribution(M, eng.round, hits, surv, target.kind, lost_mass=eng.lost)
        sieve_used = eng.target.sieve
    else:
        if rounds < 1:
            raise ValueError("rounds must be >= 1")
        target = _resolve_target(target, sieve, M * rounds)
        dist = run_dp(M, rounds, target)
        status = "fixed"
        sieve_used = target.sieve

    truncated = dist.expectation_truncated()
    tail = tail_estimate(dist)
    bound = None
    if rigorous:
        try:
            bound = tail_bound_rigorous(M, dist.rounds, sieve_used, survivor_mass=dist.pr_survive[-1])
        except TailBoundUnavailable:
            bound = None
    return ExpectationResult(
        faces=M,
        rounds_used=dist.rounds,
        expectation_truncated=truncated,
        survivor_mass=dist.pr_survive[-1],
        tail_estimate=tail,
        expectation_total=truncated + tail,
        mode="auto-epsilon" if auto else "fixed-rounds",
        status=status,
        tail_bound_rigorous=bound,
        lost_mass=dist.lost_mass,
        target_kind=dist.target_kind,
        distribution=dist,
    )


def tail_bound_rigorous(
    M: int,
    R: int,
    sieve: SieveTable | None = None,
    survivor_mass: float | None = None,
    chunk: int = 1 << 16,
    max_terms: int = 10**9,
) -> float:
    """Certified upper bound on the sum over r > R of r Pr_P(r) (prime targets).

    Chain: the tail is at most sum_{k >= R} (k+1)^2 (1 - 1/M)^pi(k), and
    grouping k by ell = pi(k) bounds that by sum_{ell >= pi(R)} ell^8 q^ell,
    q = 1 - 1/M. The series is summed in log space until the term ratio
    (1 + 1/ell)^8 q drops below one and the terms stop mattering; the rest is
    bounded by a geometric remainder. Very loose unless R >> 8 M log M.
    """
    if survivor_mass is not None and survivor_mass == 0:
        return 0.0
    if M == 1:
        return 0.0
    if sieve is None:
        sieve = build_sieve(R)
    ell0 = prime_pi(sieve, R)
    if ell0 < 3:
        raise TailBoundUnavailable(f"pi(R) = {ell0} < 3; the grouping step needs ell >= 3")
    logq = math.log1p(-1.0 / M)

    log_total = -math.inf
    ell = ell0
    while ell - ell0 < max_terms:
        ls = np.arange(ell, ell + chunk, dtype=np.float64)
        logs = 8.0 * np.log(ls) + ls * logq
        m = float(logs.max())
        log_chunk = m + math.log(float(np.sum(np.exp(logs - m))))
        log_total = np.logaddexp(log_total, log_chunk)
        ell += chunk
        log_ratio = 8.0 * math.log1p(1.0 / ell) + logq
        log_next = 8.0 * math.log(ell) + ell * logq
        if log_ratio < 0 and log_next - log_total < -40:
            log_rem = log_next - math.log(-math.expm1(log_ratio))
            return float(math.exp(np.logaddexp(log_total, log_rem)))
    raise TailBoundUnavailable(f"remainder factor not positive after {max_terms} terms; bound unavailable at R={R}")


def pr_rk_bound_check(
    M: int,
    R: int,
    sieve: SieveTable | None = None,
    target: TargetSet | None = None,
    slack: float = 1e-14,
) -> BoundReport:
    """Pr(r, k) <= (1 - 1/M)^pi(k) for every non-prime k at every round r <= R."""
    if sieve is None:
        sieve = target.sieve if target is not None else build_sieve(max(M * R, 2))
    if target is None:
        target = TargetSet.primes(sieve)
    report = BoundReport(f"pr-rk-bound(M={M}, R={R})")
    q = 1.0 - 1.0 / M
    for state, _ in iter_states(M, R, target):
        ks = state.sums
        keep = ~sieve.is_prime[ks]
        ks = ks[keep]
        vals = state.mass[keep]
        rhs = q ** prime_pi_many(sieve, ks).astype(float)
        report.samples_checked += int(ks.size)
        for i in np.flatnonzero(vals > rhs + slack):
            report.violations.append(
                Violation(int(ks[i]), float(vals[i]), float(rhs[i]), f"r={state.round}")
            )
    return report


# ---------------------------------------------------------------------------
# enumeration oracle
# ---------------------------------------------------------------------------


def enumerate_exact(M: int, R: int, target: TargetSet | None = None) -> ExactTally:
    """Walk every roll sequence of length <= R, stopping a branch at a target.

    Visits at most M + M^2 + ... + M^R prefixes; refuses above 10^7.
    """
    if M < 1 or R < 1:
        raise ValueError("need M >= 1 and R >= 1")
    if M**R > ENUMERATION_BUDGET:
        raise CapacityError(f"M^R = {M**R} exceeds enumeration budget {ENUMERATION_BUDGET}")
    if target is None:
        target = TargetSet.primes(build_sieve(M * R))
    is_target = [False] + [target.contains(s) for s in range(1, M * R + 1)]

    hit = [0] * R
    survive: dict[tuple[int, int], int] = {}
    stack = [(0, 0)]  # (rounds played, running sum)
    while stack:
        depth, total = stack.pop()
        for face in range(1, M + 1):
            s = total + face
            if is_target[s]:
                hit[depth] += 1
            else:
                key = (depth + 1, s)
                survive[key] = survive.get(key, 0) + 1
                if depth + 1 < R:
                    stack.append((depth + 1, s))
    return ExactTally(M, R, hit, survive)
