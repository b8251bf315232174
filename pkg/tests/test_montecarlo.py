import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from primedice.montecarlo import (
    SimConfig,
    compare_to_dp,
    default_max_rounds,
    draw_faces,
    mix64,
    simulate,
    trial_keys,
)
from primedice.prime_engine import TargetSet
from primedice.stopping_dp import expectation


@pytest.fixture(scope="module")
def target(sieve):
    return TargetSet.primes(sieve)


def test_mix64_reference_values():
    # SplitMix64 outputs for seed 0, from the reference C generator
    state = np.uint64(0)
    golden = np.uint64(0x9E3779B97F4A7C15)
    outs = []
    with np.errstate(over="ignore"):
        for _ in range(3):
            state = state + golden
            outs.append(int(mix64(state)))
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


@settings(max_examples=50, deadline=None)
@given(M=st.integers(1, 10**6), seed=st.integers(0, 2**63))
def test_draws_in_range(M, seed):
    keys = trial_keys(seed, np.arange(500, dtype=np.uint64))
    d = draw_faces(keys, np.zeros(500, dtype=np.uint64), M)
    assert d.min() >= 1 and d.max() <= M


def test_draws_roughly_uniform():
    keys = trial_keys(7, np.arange(60_000, dtype=np.uint64))
    d = draw_faces(keys, np.zeros(60_000, dtype=np.uint64), 6)
    counts = np.bincount(d, minlength=7)[1:]
    assert np.all(np.abs(counts - 10_000) < 5 * math.sqrt(10_000))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(faces=0, trials=10, seed=1)
    with pytest.raises(ValueError):
        SimConfig(faces=6, trials=0, seed=1)
    with pytest.raises(ValueError):
        SimConfig(faces=6, trials=10, seed=1, max_rounds=0)
    assert SimConfig(6, 10, 1).horizon == default_max_rounds(6) == 120


def test_one_sided_is_deterministic(target):
    sim = simulate(SimConfig(faces=1, trials=1000, seed=3), target=target)
    assert sim.mean_tau == 2.0 and sim.stderr == 0.0
    assert sim.histogram == {2: 1000}


def test_two_sided_mean(target):
    sim = simulate(SimConfig(faces=2, trials=100_000, seed=42), target=target)
    assert abs(sim.mean_tau - 1.5) < 4 * sim.stderr
    assert sim.censored == 0


def test_counts_add_up(target):
    sim = simulate(SimConfig(faces=50, trials=20_000, seed=9, max_rounds=3), target=target)
    assert sum(sim.histogram.values()) + sim.censored == 20_000
    assert sim.censored > 0
    assert max(sim.histogram) <= 3


def test_thread_count_does_not_change_histogram(target):
    cfg = SimConfig(faces=6, trials=200_000, seed=11)
    base = simulate(cfg, target=target)
    for threads in (2, 3, 8):
        assert simulate(cfg, target=target, threads=threads).histogram == base.histogram


def test_seed_changes_histogram(target):
    a = simulate(SimConfig(faces=6, trials=10_000, seed=1), target=target)
    b = simulate(SimConfig(faces=6, trials=10_000, seed=2), target=target)
    assert a.histogram != b.histogram


def test_per_round_frequencies(target):
    n = 200_000
    sim = simulate(SimConfig(faces=6, trials=n, seed=5), target=target)
    for r, p in ((1, 0.5), (2, 8 / 36)):
        sd = math.sqrt(n * p * (1 - p))
        assert abs(sim.histogram[r] - n * p) < 4 * sd


def test_compare_to_dp(target):
    sim = simulate(SimConfig(faces=6, trials=100_000, seed=42), target=target)
    cmp = compare_to_dp(sim, expectation(6, None, target=target))
    assert not cmp.flagged
    assert cmp.dof > 5 and cmp.p_value > 1e-4
    assert cmp.notes == []


def test_compare_notes_censoring(target):
    sim = simulate(SimConfig(faces=100, trials=5_000, seed=1, max_rounds=5), target=target)
    cmp = compare_to_dp(sim, expectation(100, None, target=target))
    assert any("censored" in n for n in cmp.notes)


def test_compare_rejects_mismatch(target):
    sim = simulate(SimConfig(faces=6, trials=100, seed=1), target=target)
    with pytest.raises(ValueError):
        compare_to_dp(sim, expectation(7, 20, target=target))
    sq = expectation(6, 20, target=TargetSet.squares(200))
    with pytest.raises(ValueError):
        compare_to_dp(sim, sq)


def test_squares_target_simulation():
    cfg = SimConfig(faces=4, trials=50_000, seed=8, target_kind="squares")
    sim = simulate(cfg)
    exact = expectation(4, None, target=TargetSet.squares(10**5))
    assert abs(compare_to_dp(sim, exact).z) < 4


def test_small_sieve_rejected(sieve):
    from primedice.prime_engine import build_sieve

    with pytest.raises(ValueError):
        simulate(SimConfig(faces=100, trials=10, seed=1), sieve=build_sieve(1000))
