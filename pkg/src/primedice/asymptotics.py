"""Multi-M experiments: the expected-round table, the log M comparison, and
per-round envelope reports.

All logarithms are natural.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from .prime_engine import TargetSet, build_sieve
from .stopping_dp import DEFAULT_EPS, StoppingDistribution, expectation, run_dp

TABLE_FACES = (10, 20, 50, 100, 200, 500, 1000)
# sieve headroom in auto mode, in rounds; the DP extends further on demand
AUTO_SIEVE_ROUNDS = 512


@dataclass
class ScanRow:
    M: int
    R: int
    E_trunc: float
    tail_est: float
    E_total: float
    log_M: float
    diff: float
    loglog_M: float | None
    implied_c: float | None
    survivor_mass: float
    status: str = "fixed"

    @classmethod
    def from_expectation(cls, res) -> "ScanRow":
        M = res.faces
        log_m = math.log(M)
        diff = res.expectation_total - log_m
        loglog = math.log(log_m) if M > math.e else None
        return cls(
            M=M,
            R=res.rounds_used,
            E_trunc=res.expectation_truncated,
            tail_est=res.tail_estimate,
            E_total=res.expectation_total,
            log_M=log_m,
            diff=diff,
            loglog_M=loglog,
            implied_c=diff / loglog if loglog else None,
            survivor_mass=res.survivor_mass,
            status=res.status,
        )


def scan(
    faces_list,
    rounds: int | None = 50,
    target: TargetSet | None = None,
    eps: float = DEFAULT_EPS,
    threads: int = 1,
) -> list[ScanRow]:
    """One row per face count, ascending. ``rounds=None`` runs auto mode.

    A single sieve covers every M; each M is an independent task.
    """
    faces = sorted(set(int(m) for m in faces_list))
    if not faces:
        raise ValueError("empty face list")
    if faces[0] < 2:
        raise ValueError("scan needs M >= 2")
    need = faces[-1] * (rounds if rounds is not None else AUTO_SIEVE_ROUNDS)
    if target is None:
        target = TargetSet.primes(build_sieve(need))
    elif target.limit < need and rounds is not None:
        target = target.extended(need)

    def one(M: int) -> ScanRow:
        res = expectation(M, rounds, eps=eps, target=target)
        return ScanRow.from_expectation(res)

    if threads > 1 and len(faces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, faces))
    else:
        rows = [one(M) for M in faces]
    return rows


def theorem_check(rows: list[ScanRow]) -> dict:
    """Descriptive summary of E - log M against log log M over a scan."""
    usable = [r for r in rows if r.loglog_M is not None]
    if len(usable) < 2:
        raise ValueError("need at least two rows with M > e")
    return {
        "rows": len(usable),
        "max_abs_implied_constant": max(abs(r.implied_c) for r in usable),
        "diff_positive_all": all(r.diff > 0 for r in usable),
        "min_diff": min(r.diff for r in usable),
        "faces": [r.M for r in usable],
    }


# ---------------------------------------------------------------------------
# envelope reports
# ---------------------------------------------------------------------------

ENVELOPES = ("survive_lower", "survive_upper", "hit_lower", "hit_upper")


def rounds_r1(M: int) -> int:
    return math.floor(math.log(M) ** 3)


def lower_upper_logs(M: int) -> tuple[float, float]:
    """(L, U) = (log M - 4 log log M, log M + 4 log log M)."""
    lm = math.log(M)
    llm = math.log(lm)
    return lm - 4 * llm, lm + 4 * llm


@dataclass
class EnvelopeReport:
    M: int
    R1: int
    L: float
    U: float
    rounds_checked: int
    # per envelope: one entry per round, True/False, or None when not applicable
    table: dict[str, list] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def violations(self) -> dict[str, int]:
        return {k: sum(1 for v in vals if v is False) for k, vals in self.table.items()}

    def applicable(self) -> dict[str, bool]:
        return {k: any(v is not None for v in vals) for k, vals in self.table.items()}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = self.violations()
        return d


def envelope_report(M: int, dist: StoppingDistribution, R1: int | None = None) -> EnvelopeReport:
    """Compare Pr_N(r), Pr_P(r) for r <= R1 with the geometric envelopes

        (1 - 1/L)^r <= Pr_N(r) <= (1 - 1/U)^r,
        (1/U)(1 - 1/L)^(r-1) <= Pr_P(r) <= (1/L)(1 - 1/U)^(r-1).

    Envelopes involving L are only meaningful once L > 1; before that they
    are marked None rather than failed.
    """
    if M < 3:
        raise ValueError("envelopes need M >= 3")
    R1 = rounds_r1(M) if R1 is None else R1
    L, U = lower_upper_logs(M)
    n = min(R1, dist.rounds)
    rep = EnvelopeReport(M=M, R1=rounds_r1(M), L=L, U=U, rounds_checked=n)
    if M < 16:
        rep.notes.append("small M: envelopes are only claimed for sufficiently large M")
    if n < R1:
        rep.notes.append(f"distribution covers {n} of {R1} rounds")
    l_ok = L > 1
    if not l_ok:
        rep.notes.append(f"L = {L:.5g} <= 1: L-based envelopes not applicable")
    qU = 1 - 1 / U
    qL = 1 - 1 / L if l_ok else None
    table = {k: [] for k in ENVELOPES}
    slack = 1e-12
    for r in range(1, n + 1):
        surv = float(dist.pr_survive[r])
        hit = float(dist.pr_hit[r - 1])
        table["survive_upper"].append(surv <= qU**r * (1 + slack))
        table["survive_lower"].append(surv >= qL**r * (1 - slack) if l_ok else None)
        table["hit_lower"].append(hit >= qL ** (r - 1) / U * (1 - slack) if l_ok else None)
        table["hit_upper"].append(hit <= qU ** (r - 1) / L * (1 + slack) if l_ok else None)
    rep.table = table
    return rep


def envelope_sweep(faces_list, max_rounds: int | None = None) -> list[EnvelopeReport]:
    """Envelope reports for each M over r <= R1 = floor((log M)^3).

    ``max_rounds`` caps the DP depth for large M (R1 grows like (log M)^3 and
    the DP costs M R^2 / 2).
    """
    reports = []
    for M in sorted(set(int(m) for m in faces_list)):
        if M < 3:
            raise ValueError("envelopes need M >= 3")
        R1 = rounds_r1(M)
        depth = R1 if max_rounds is None else min(R1, max_rounds)
        dist = run_dp(M, max(depth, 1))
        reports.append(envelope_report(M, dist, R1))
    return reports
