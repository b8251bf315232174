import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from primedice._kernels import window_pass
from primedice.prime_engine import CapacityError, TargetSet, build_sieve, prime_pi
from primedice.stopping_dp import (
    TailBoundUnavailable,
    _window_sums,
    advance_round,
    enumerate_exact,
    expectation,
    geometric_tail,
    initial_state,
    iter_states,
    pr_rk_bound_check,
    run_dp,
    tail_bound_rigorous,
    tail_estimate,
)

from .conftest import is_prime_td


def brute_force(M, R, is_target=is_prime_td):
    """Pr_P(r) for r = 1..R by walking every roll sequence, as Fractions."""
    hits = [0] * R
    for seq in itertools.product(range(1, M + 1), repeat=R):
        s = 0
        for r, d in enumerate(seq):
            s += d
            if is_target(s):
                hits[r] += 1
                break
    return [Fraction(h, M**R) for h in hits]


def naive_step(old, M):
    """new[j] = sum of old[i] for j - M < i <= j, one term at a time."""
    n = len(old)
    out = []
    for j in range(n + M - 1):
        s = 0
        for i in range(max(0, j - M + 1), min(n, j + 1)):
            s += old[i]
        out.append(s)
    return out


@pytest.fixture(scope="module")
def target(sieve):
    return TargetSet.primes(sieve)


# ---------------------------------------------------------------------------
# exact small cases
# ---------------------------------------------------------------------------


def test_six_sided_first_two_rounds(target):
    d = run_dp(6, 3, target, exact=True)
    assert d.pr_hit[0] == Fraction(3, 6)
    assert d.pr_hit[1] == Fraction(8, 36)
    assert d.pr_hit[2] == Fraction(5, 54)


def test_two_sided_expectation_is_three_halves(target):
    d = run_dp(2, 10, target, exact=True)
    assert d.pr_hit[:2] == [Fraction(1, 2), Fraction(1, 2)]
    assert d.pr_survive[-1] == 0
    assert d.expectation_truncated() == Fraction(3, 2)
    assert expectation(2, 50, target=target).expectation_total == 1.5


def test_one_sided_always_stops_at_two(target):
    d = run_dp(1, 5, target, exact=True)
    assert d.pr_hit == [0, 1, 0, 0, 0]
    assert d.expectation_truncated() == 2
    res = expectation(1, 50, target=target)
    assert res.expectation_total == 2.0 and res.tail_estimate == 0.0


def test_round_one_survivors(target):
    state, hit = advance_round(initial_state(6, exact=True), target)
    assert hit == Fraction(1, 2)
    assert state.offset == 1
    assert [state.probability(k) for k in range(0, 8)] == [0, Fraction(1, 6), 0, 0, Fraction(1, 6), 0, Fraction(1, 6), 0]


@pytest.mark.parametrize("M,R", [(2, 6), (3, 5), (4, 4), (5, 4), (6, 4), (7, 3), (10, 3)])
def test_dp_matches_brute_force(target, M, R):
    assert run_dp(M, R, target, exact=True).pr_hit == brute_force(M, R)


@pytest.mark.parametrize("M", range(2, 7))
def test_enumeration_tally_matches_dp_cellwise(target, M):
    R = max(r for r in range(1, 6) if M**r <= 10**6)
    tally = enumerate_exact(M, R, target)
    for state, _ in iter_states(M, R, target, exact=True):
        cells = {k: int(c) for k, c in zip(state.sums, state.mass) if c}
        assert cells == {k: c for (r, k), c in tally.counts_survive.items() if r == state.round}


def test_enumeration_budget():
    with pytest.raises(CapacityError):
        enumerate_exact(10, 8)


def test_squares_target_against_brute_force():
    squares = TargetSet.squares(1000)
    is_sq = lambda n: math.isqrt(n) ** 2 == n
    assert run_dp(4, 4, squares, exact=True).pr_hit == brute_force(4, 4, is_sq)
    assert run_dp(4, 4, squares).target_kind == "squares"


# ---------------------------------------------------------------------------
# transition kernels
# ---------------------------------------------------------------------------


def test_prefix_window_equals_naive_exhaustive():
    # every M <= 30 and every round r <= 10 of the exact DP
    sieve = build_sieve(400)
    for M in range(1, 31):
        old = np.array([1], dtype=object)
        offset = 0
        for r in range(1, 11):
            out = np.empty(len(old) + M - 1, dtype=object)
            _window_sums(old, M, np.empty(len(old) + 1, dtype=object), out)
            assert out.tolist() == naive_step(old.tolist(), M)
            offset += 1
            primes = sieve.is_prime[offset : offset + len(out)]
            out[primes] = 0
            old = out


@settings(max_examples=200, deadline=None)
@given(
    old=st.lists(st.integers(0, 10**12), min_size=1, max_size=60),
    M=st.integers(1, 40),
)
def test_prefix_window_any_vector(old, M):
    out = np.empty(len(old) + M - 1, dtype=object)
    _window_sums(np.array(old, dtype=object), M, np.empty(len(old) + 1, dtype=object), out)
    assert out.tolist() == naive_step(old, M)


@settings(max_examples=200, deadline=None)
@given(
    old=st.lists(st.floats(0, 1, allow_subnormal=False), min_size=1, max_size=80),
    M=st.integers(1, 50),
)
def test_float_window_close_to_exact(old, M):
    out = np.empty(len(old) + M - 1)
    window_pass(np.array(old), M, out)
    want = [math.fsum(old[max(0, j - M + 1) : j + 1]) for j in range(len(out))]
    np.testing.assert_allclose(out, want, rtol=1e-12, atol=1e-15 * max(sum(old), 1e-300))


# ---------------------------------------------------------------------------
# float mode against exact mode
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("M", [2, 3, 6, 11, 30])
def test_float_agrees_with_exact(target, M):
    R = 12
    fe = run_dp(M, R, target)
    ex = run_dp(M, R, target, exact=True)
    np.testing.assert_allclose(fe.pr_hit, [float(p) for p in ex.pr_hit], rtol=0, atol=1e-12)
    np.testing.assert_allclose(fe.pr_survive, [float(p) for p in ex.pr_survive], rtol=0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(M=st.integers(2, 40), R=st.integers(1, 15))
def test_float_agrees_with_exact_random(target, M, R):
    fe = run_dp(M, R, target)
    ex = run_dp(M, R, target, exact=True)
    assert abs(fe.expectation_truncated() - float(ex.expectation_truncated())) <= 1e-12 * R


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("M", [2, 3, 7, 20, 50])
def test_distribution_invariants(target, sieve, M):
    R = 20
    prev_total = 1.0
    prev_sums = {0}
    for r, (state, hit) in enumerate(iter_states(M, R, target), start=1):
        total = state.total()
        assert abs(hit + total - prev_total) <= 1e-12 * r
        assert total <= prev_total + 1e-15
        assert 0 <= hit <= prev_total
        assert np.all(state.mass >= 0) and np.all(state.mass <= 1)
        live = state.sums[state.mass > 0]
        if live.size:
            assert live.min() >= r and live.max() <= M * r
        assert not np.any(sieve.is_prime[state.sums][state.mass > 0])
        prev_total = total


@pytest.mark.parametrize("M", [2, 6, 17, 50])
def test_pr_rk_bound_holds(M):
    rep = pr_rk_bound_check(M, 20)
    assert rep.passed
    assert rep.samples_checked > 0


def test_lost_mass_is_tiny_for_long_runs(target):
    d = run_dp(2, 3000, TargetSet.primes(build_sieve(6000)))
    assert d.lost_mass < 1e-300


# ---------------------------------------------------------------------------
# tails and expectation
# ---------------------------------------------------------------------------


def test_geometric_tail_arithmetic():
    # q = 0.8: 1.6e-5 * (51 + 4)
    assert geometric_tail(2e-5, 1.6e-5, 50) == pytest.approx(8.8e-4, rel=1e-12)


def test_geometric_tail_degenerate():
    assert geometric_tail(0.0, 0.0, 10) == 0.0
    assert geometric_tail(1e-3, 0.0, 10) == 0.0
    with pytest.raises(RuntimeError):
        geometric_tail(1e-3, 2e-3, 10)


def test_six_sided_expectation(target):
    res = expectation(6, 50, target=target)
    assert res.mode == "fixed-rounds" and res.status == "fixed"
    assert res.expectation_total == pytest.approx(2.42849, abs=5e-4)
    assert res.expectation_total == res.expectation_truncated + res.tail_estimate
    assert res.tail_estimate == tail_estimate(res.distribution)


def test_auto_mode_converges(target):
    res = expectation(100, None, eps=1e-9, target=target)
    assert res.mode == "auto-epsilon" and res.status == "converged"
    d = res.distribution
    assert geometric_tail(d.pr_survive[-2], d.pr_survive[-1], d.rounds) < 1e-9


def test_auto_mode_cap(target):
    res = expectation(100, None, eps=1e-30, target=target, max_rounds=40)
    assert res.status == "cap-reached" and res.rounds_used == 40


def test_auto_mode_grows_small_sieve():
    res = expectation(50, None, target=TargetSet.primes(build_sieve(100)))
    assert res.status == "converged" and res.rounds_used * 50 > 100


def test_fixed_mode_needs_enough_sieve():
    with pytest.raises(CapacityError):
        run_dp(10, 50, TargetSet.primes(build_sieve(100)))


def test_bad_arguments(target):
    with pytest.raises(ValueError):
        expectation(0, 10)
    with pytest.raises(ValueError):
        expectation(6, 0, target=target)
    with pytest.raises(ValueError):
        expectation(6, None, eps=0, target=target)


def test_rigorous_bound_small_m(sieve):
    b = tail_bound_rigorous(10, 10_000, sieve)
    assert math.isfinite(b) and 0 < b < 1e-10


def test_rigorous_bound_loose_for_larger_m(sieve):
    # the ell^8 factor dominates unless R >> 8 M log M
    b = tail_bound_rigorous(100, 10_000, sieve)
    assert math.isfinite(b) and b > 1


def test_rigorous_bound_edge_cases(sieve):
    assert tail_bound_rigorous(1, 100, sieve) == 0.0
    assert tail_bound_rigorous(6, 100, sieve, survivor_mass=0.0) == 0.0
    assert prime_pi(sieve, 4) == 2
    with pytest.raises(TailBoundUnavailable):
        tail_bound_rigorous(6, 4, sieve)


def test_rigorous_bound_dominates_estimate(sieve):
    res = expectation(10, 400, target=TargetSet.primes(sieve), rigorous=True)
    assert res.tail_bound_rigorous is not None
    assert res.tail_bound_rigorous >= res.tail_estimate
