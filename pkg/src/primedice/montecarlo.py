"""Seeded Monte Carlo simulation of the stopping game.

Every trial owns an independent SplitMix64 stream keyed by (seed, trial
index), and draw ``d`` of that trial is a pure function of the triple. Trials
can therefore be split across workers in any way without changing a single
draw.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .prime_engine import SieveTable, TargetSet, build_sieve
from .stopping_dp import ExpectationResult

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
CHUNK = 1 << 16


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser, elementwise on uint64."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def trial_keys(seed: int, trials: np.ndarray) -> np.ndarray:
    base = mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        spread = np.asarray(trials, dtype=np.uint64) * GOLDEN
    return mix64(base ^ spread)


def draw_faces(keys: np.ndarray, counters: np.ndarray, M: int) -> np.ndarray:
    """Uniform integers in [1, M], one per key; advances ``counters`` in place.

    Rejection sampling: raw 64-bit words at or above the largest multiple of M
    are redrawn from the same stream.
    """
    accept_below = (2**64 // M) * M
    out = np.empty(len(keys), dtype=np.int64)
    todo = np.arange(len(keys))
    while todo.size:
        counters[todo] += np.uint64(1)
        with np.errstate(over="ignore"):
            x = mix64(keys[todo] + counters[todo] * GOLDEN)
        if accept_below == 2**64:
            # M divides 2^64: every word is usable
            out[todo] = (x % np.uint64(M)).astype(np.int64) + 1
            break
        ok = x < np.uint64(accept_below)
        out[todo[ok]] = (x[ok] % np.uint64(M)).astype(np.int64) + 1
        todo = todo[~ok]
    return out


def default_max_rounds(M: int) -> int:
    return 10 * math.ceil(math.log(M)) + 100 if M > 1 else 100


@dataclass(frozen=True)
class SimConfig:
    faces: int
    trials: int
    seed: int
    max_rounds: int | None = None
    target_kind: str = "primes"

    def __post_init__(self):
        if self.faces < 1:
            raise ValueError("faces must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")

    @property
    def horizon(self) -> int:
        return self.max_rounds if self.max_rounds is not None else default_max_rounds(self.faces)


@dataclass
class SimResult:
    config: SimConfig
    histogram: dict[int, int]
    censored: int
    mean_tau: float
    stderr: float

    @property
    def uncensored(self) -> int:
        return self.config.trials - self.censored

    def to_dict(self) -> dict:
        c = self.config
        return {
            "faces": c.faces,
            "trials": c.trials,
            "seed": c.seed,
            "max_rounds": c.horizon,
            "target": c.target_kind,
            "mean_tau": self.mean_tau,
            "stderr": self.stderr,
            "censored": self.censored,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def _run_chunk(
    config: SimConfig, first: int, count: int, is_target: np.ndarray
) -> tuple[np.ndarray, int]:
    M = config.faces
    horizon = config.horizon
    trials = np.arange(first, first + count, dtype=np.uint64)
    keys = trial_keys(config.seed, trials)
    counters = np.zeros(count, dtype=np.uint64)
    sums = np.zeros(count, dtype=np.int64)
    hist = np.zeros(horizon + 1, dtype=np.int64)
    for r in range(1, horizon + 1):
        sums += draw_faces(keys, counters, M)
        hit = is_target[sums]
        hist[r] = int(np.count_nonzero(hit))
        if hist[r]:
            alive = ~hit
            keys, counters, sums = keys[alive], counters[alive], sums[alive]
        if not len(sums):
            break
    return hist, len(sums)


def _indicator(target: TargetSet, limit: int) -> np.ndarray:
    if target.kind == "primes":
        return target.sieve.is_prime[: limit + 1]
    mask = np.zeros(limit + 1, dtype=bool)
    mask[target.members_between(1, limit)] = True
    return mask


def simulate(
    config: SimConfig,
    sieve: SieveTable | None = None,
    target: TargetSet | None = None,
    threads: int = 1,
) -> SimResult:
    """Play ``config.trials`` independent games up to the censoring horizon."""
    need = config.faces * config.horizon
    if target is None:
        if config.target_kind == "primes":
            target = TargetSet.primes(sieve if sieve is not None else build_sieve(need))
        elif config.target_kind == "squares":
            target = TargetSet.squares(need)
        else:
            raise ValueError(f"pass a TargetSet for target kind {config.target_kind!r}")
    if target.limit < need:
        raise ValueError(f"target/sieve limit {target.limit} < faces * max_rounds = {need}")
    is_target = _indicator(target, need)

    spans = [(s, min(CHUNK, config.trials - s)) for s in range(0, config.trials, CHUNK)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda sp: _run_chunk(config, sp[0], sp[1], is_target), spans))
    else:
        parts = [_run_chunk(config, s, n, is_target) for s, n in spans]

    hist = np.zeros(config.horizon + 1, dtype=np.int64)
    censored = 0
    for h, c in parts:
        hist += h
        censored += c

    rounds = np.arange(config.horizon + 1)
    n = int(hist.sum())
    if n:
        mean = float(np.dot(rounds, hist)) / n
        var = float(np.dot((rounds - mean) ** 2, hist)) / (n - 1) if n > 1 else 0.0
        stderr = math.sqrt(var / n)
    else:
        mean, stderr = math.nan, math.nan
    histogram = {int(r): int(c) for r, c in enumerate(hist) if c}
    return SimResult(config, histogram, censored, mean, stderr)


@dataclass
class Comparison:
    faces: int
    sim_mean: float
    sim_stderr: float
    exact_mean: float
    z: float
    flagged: bool
    chi2: float
    dof: int
    p_value: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compare_to_dp(sim: SimResult, exact: ExpectationResult, z_limit: float = 4.0) -> Comparison:
    """z-score of the simulated mean against the DP, plus a per-round chi-square."""
    cfg = sim.config
    if cfg.faces != exact.faces:
        raise ValueError(f"face counts differ: simulation {cfg.faces}, DP {exact.faces}")
    if cfg.target_kind != exact.target_kind:
        raise ValueError(f"target sets differ: {cfg.target_kind} vs {exact.target_kind}")

    diff = sim.mean_tau - exact.expectation_total
    if sim.stderr > 0:
        z = diff / sim.stderr
    else:
        z = 0.0 if abs(diff) < 1e-9 else math.copysign(math.inf, diff)

    notes = []
    if sim.censored:
        notes.append(
            f"{sim.censored} censored trials: simulated mean is biased low (long games removed)"
        )

    # expected per-round counts, rounds with small expectation pooled at the end
    chi2, dof, p = 0.0, 0, 1.0
    dist = exact.distribution
    if dist is not None:
        n = cfg.trials
        last = min(cfg.horizon, dist.rounds)
        observed, expected = [], []
        for r in range(1, last + 1):
            observed.append(sim.histogram.get(r, 0))
            expected.append(n * float(dist.pr_hit[r - 1]))
        rest_obs = n - sum(observed)
        rest_exp = max(n - sum(expected), 0.0)
        observed.append(rest_obs)
        expected.append(rest_exp)
        bins_o, bins_e = [], []
        acc_o, acc_e = 0, 0.0
        for o, e in zip(observed, expected):
            acc_o += o
            acc_e += e
            if acc_e >= 5:
                bins_o.append(acc_o)
                bins_e.append(acc_e)
                acc_o, acc_e = 0, 0.0
        if bins_e and (acc_e > 0 or acc_o > 0):
            bins_o[-1] += acc_o
            bins_e[-1] += acc_e
        if len(bins_e) > 1:
            o = np.array(bins_o, dtype=float)
            e = np.array(bins_e)
            chi2 = float(np.sum((o - e) ** 2 / e))
            dof = len(bins_e) - 1
            p = float(stats.chi2.sf(chi2, dof))
    return Comparison(
        faces=cfg.faces,
        sim_mean=sim.mean_tau,
        sim_stderr=sim.stderr,
        exact_mean=exact.expectation_total,
        z=z,
        flagged=not abs(z) <= z_limit,
        chi2=chi2,
        dof=dof,
        p_value=p,
        notes=notes,
    )
