"""Command-line front end.

    primedice expect   --faces M [--rounds R | --auto --eps E] [--target primes|squares]
    primedice simulate --faces M --trials N --seed S [--max-rounds K] [--compare-dp]
    primedice scan     --faces 10,20,50 --rounds 50 [--out FILE.csv]
    primedice verify   --suite rs-bounds|pi-li|interval-lemma|s-ell|prk-bound|envelopes
    primedice primes   --pi X | --window K,M | --li X

Exit codes: 0 ok, 1 usage or I/O error, 2 failed assert-grade verification.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

from . import asymptotics, montecarlo, prime_engine, stopping_dp
from .prime_engine import CapacityError, TargetSet, build_sieve

SCHEMA_VERSION = "1"
SCAN_HEADER = [
    "M", "R", "E_trunc", "tail_est", "E_total", "log_M",
    "diff", "loglog_M", "implied_c", "survivor_mass",
]
ASSERT_SUITES = {"rs-bounds", "s-ell", "prk-bound"}
REPORT_SUITES = {"pi-li", "interval-lemma", "envelopes"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------


def fmt_machine(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _round_floats(obj, digits: int = 12):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(format(obj, f".{digits}g"))
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, digits) for v in obj]
    return obj


def _text(x) -> str:
    if isinstance(x, float):
        return format(x, ".5g")
    return str(x)


def _emit(args, payload: dict, started: float, csv_rows: list[dict] | None = None) -> None:
    fmt = getattr(args, "format", "text")
    if fmt == "json":
        params = {k: v for k, v in vars(args).items() if k not in ("func", "format", "command")}
        env = {
            "schema_version": SCHEMA_VERSION,
            "command": args.command,
            "parameters": params,
            "payload": _round_floats(payload),
            "timing": {"wall_ms": round((time.perf_counter() - started) * 1000, 3)},
        }
        print(json.dumps(env, sort_keys=True))
    elif fmt == "csv":
        rows = csv_rows if csv_rows is not None else [payload]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: fmt_machine(v) for k, v in row.items()})
        sys.stdout.write(buf.getvalue())
    else:
        for key, val in payload.items():
            if isinstance(val, (dict, list)):
                continue
            print(f"{key}: {_text(val)}")


def _make_target(kind: str, limit: int) -> TargetSet:
    if kind == "primes":
        return TargetSet.primes(build_sieve(limit))
    if kind == "squares":
        return TargetSet.squares(limit)
    raise UsageError(f"unknown target {kind!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_expect(args) -> int:
    started = time.perf_counter()
    if args.faces < 1:
        raise UsageError("--faces must be >= 1")
    rounds = None if args.auto else args.rounds
    if rounds is not None and rounds < 1:
        raise UsageError("--rounds must be >= 1")
    need = args.faces * (rounds if rounds is not None else asymptotics.AUTO_SIEVE_ROUNDS)
    target = _make_target(args.target, max(need, 2))
    res = stopping_dp.expectation(
        args.faces, rounds, eps=args.eps, target=target, rigorous=args.rigorous
    )
    payload = res.to_dict()
    _emit(args, payload, started)
    return 0


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    if args.faces < 1 or args.trials < 1:
        raise UsageError("--faces and --trials must be >= 1")
    cfg = montecarlo.SimConfig(
        faces=args.faces,
        trials=args.trials,
        seed=args.seed,
        max_rounds=args.max_rounds,
        target_kind=args.target,
    )
    target = _make_target(args.target, max(cfg.faces * cfg.horizon, 2))
    sim = montecarlo.simulate(cfg, target=target, threads=args.threads)
    payload = sim.to_dict()
    if args.compare_dp:
        exact = stopping_dp.expectation(args.faces, None, target=target)
        payload["comparison"] = montecarlo.compare_to_dp(sim, exact).to_dict()
    _emit(args, payload, started)
    if args.format == "text" and "comparison" in payload:
        c = payload["comparison"]
        print(f"z: {_text(c['z'])}  flagged: {c['flagged']}  chi2/dof: {_text(c['chi2'])}/{c['dof']}")
    return 0


def scan_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_HEADER)
    for r in rows:
        w.writerow([fmt_machine(getattr(r, h)) for h in SCAN_HEADER])
    return buf.getvalue()


def cmd_scan(args) -> int:
    started = time.perf_counter()
    rounds = None if args.auto else args.rounds
    if any(m < 2 for m in args.faces):
        raise UsageError("scan needs every M >= 2")
    target = None
    if args.target != "primes":
        need = max(args.faces) * (rounds or asymptotics.AUTO_SIEVE_ROUNDS)
        target = _make_target(args.target, need)
    rows = asymptotics.scan(args.faces, rounds, target=target, eps=args.eps, threads=args.threads)
    text = scan_csv(rows)
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write {args.out}: {exc}", file=sys.stderr)
            return 1
    payload = {"rows": [r.__dict__ for r in rows]}
    usable = [r for r in rows if r.loglog_M is not None]
    if len(usable) >= 2:
        payload["theorem_check"] = asymptotics.theorem_check(rows)
    if args.format == "csv" and not args.out:
        sys.stdout.write(text)
    elif args.format == "json":
        _emit(args, payload, started)
    else:
        print("     M     R      E_total    log M     diff")
        for r in rows:
            print(f"{r.M:6d} {r.R:5d} {r.E_total:12.5f} {r.log_M:8.5f} {r.diff:8.5f}")
        if "theorem_check" in payload:
            tc = payload["theorem_check"]
            print(f"max |implied constant|: {_text(tc['max_abs_implied_constant'])}; "
                  f"E > log M throughout: {tc['diff_positive_all']}")
    return 0


def _verify_reports(args) -> list[prime_engine.BoundReport | dict]:
    suite = args.suite
    if suite == "rs-bounds":
        limit = args.limit or 100_000
        sieve = build_sieve(limit)
        return [prime_engine.check_rosser_schoenfeld(sieve, range(5, limit + 1))]
    if suite == "pi-li":
        limit = args.limit or 1_000_000
        sieve = build_sieve(limit)
        xs = sorted({int(round(10 ** (k / 4))) for k in range(2, int(4 * math.log10(limit)) + 1)} | {limit})
        xs = [x for x in xs if 2 <= x <= limit]
        return [prime_engine.check_pi_li_gap(sieve, xs, threshold=args.threshold)]
    if suite == "interval-lemma":
        M = args.faces or 1000
        if M < 3:
            raise UsageError("interval-lemma needs --faces >= 3")
        k_max = math.floor(M * math.log(M) ** 3)
        n = args.samples
        ks = {0, math.floor(M / math.log(M) ** 3), k_max}
        ks |= {k_max * i // n for i in range(n + 1)}
        sieve = build_sieve(k_max + M)
        return [prime_engine.check_interval_lemma(sieve, M, sorted(ks))]
    if suite == "s-ell":
        limit = args.limit or 1_000_000
        sieve = build_sieve(limit)
        return [prime_engine.check_s_ell_containment(sieve, range(3, math.isqrt(limit) + 1))]
    if suite == "prk-bound":
        M = args.faces or 6
        R = args.rounds or 20
        return [stopping_dp.pr_rk_bound_check(M, R)]
    if suite == "envelopes":
        M = args.faces or 10
        if M < 3:
            raise UsageError("envelopes need --faces >= 3")
        reps = asymptotics.envelope_sweep([M], max_rounds=args.rounds)
        return [r.to_dict() for r in reps]
    raise UsageError(f"unknown suite {suite!r}")


def cmd_verify(args) -> int:
    started = time.perf_counter()
    reports = _verify_reports(args)
    dicts = [r.to_dict() if isinstance(r, prime_engine.BoundReport) else r for r in reports]
    failed = sum(sum(d["violations"].values()) if isinstance(d["violations"], dict) else d["n_violations"] for d in dicts)
    grade = "assert" if args.suite in ASSERT_SUITES else "report"
    payload = {"suite": args.suite, "grade": grade, "reports": dicts, "violations": failed}
    if args.format == "json":
        _emit(args, payload, started)
    else:
        for d in dicts:
            if "bound_name" in d:
                print(f"{d['bound_name']}: checked {d['samples_checked']}, "
                      f"violations {d['n_violations']}, waived {d['n_waived']}, passed {d['passed']}")
            else:
                print(f"envelopes(M={d['M']}): R1 {d['R1']}, rounds checked {d['rounds_checked']}, "
                      f"L {_text(d['L'])}, U {_text(d['U'])}, violations {d['violations']}")
            for note in d.get("notes", []):
                print(f"  note: {note}")
    if failed and grade == "assert":
        return 2
    if failed:
        print(f"warning: {failed} violations in report-grade suite {args.suite}", file=sys.stderr)
    return 0


def cmd_primes(args) -> int:
    started = time.perf_counter()
    if args.pi is not None:
        if args.pi < 0:
            raise UsageError("--pi needs x >= 0")
        value = prime_engine.prime_pi(build_sieve(args.pi), args.pi)
        payload = {"query": "pi", "x": args.pi, "value": value}
    elif args.window is not None:
        if len(args.window) != 2:
            raise UsageError("--window takes K,M")
        k, M = args.window
        if k < 0 or M < 1:
            raise UsageError("--window needs K >= 0 and M >= 1")
        value = prime_engine.count_primes_in_window(build_sieve(k + M), k, M)
        payload = {"query": "window", "k": k, "M": M, "value": value}
    else:
        value = prime_engine.log_integral(args.li)
        payload = {"query": "li", "x": args.li, "value": value}
    if args.format == "text":
        v = payload["value"]
        print(format(v, ".11g") if isinstance(v, float) else v)
    else:
        _emit(args, payload, started)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="primedice", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, formats=("text", "json", "csv")):
        sp.add_argument("--format", choices=formats, default="text")
        sp.add_argument("--threads", type=int, default=1)

    e = sub.add_parser("expect", help="expected stopping round by dynamic programming")
    e.add_argument("--faces", type=int, required=True)
    g = e.add_mutually_exclusive_group()
    g.add_argument("--rounds", type=int, default=stopping_dp.DEFAULT_ROUNDS)
    g.add_argument("--auto", action="store_true")
    e.add_argument("--eps", type=float, default=stopping_dp.DEFAULT_EPS)
    e.add_argument("--target", choices=("primes", "squares"), default="primes")
    e.add_argument("--rigorous", action="store_true", help="also compute the certified tail bound")
    common(e)
    e.set_defaults(func=cmd_expect)

    s = sub.add_parser("simulate", help="Monte Carlo estimate of the stopping round")
    s.add_argument("--faces", type=int, required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--max-rounds", type=int, default=None)
    s.add_argument("--target", choices=("primes", "squares"), default="primes")
    s.add_argument("--compare-dp", action="store_true")
    common(s, ("text", "json"))
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("scan", help="expected stopping round over several M")
    c.add_argument("--faces", type=_int_list, default=list(asymptotics.TABLE_FACES))
    g = c.add_mutually_exclusive_group()
    g.add_argument("--rounds", type=int, default=stopping_dp.DEFAULT_ROUNDS)
    g.add_argument("--auto", action="store_true")
    c.add_argument("--eps", type=float, default=stopping_dp.DEFAULT_EPS)
    c.add_argument("--target", choices=("primes", "squares"), default="primes")
    c.add_argument("--out", default=None)
    common(c)
    c.set_defaults(func=cmd_scan)

    v = sub.add_parser("verify", help="check the prime-counting and probability bounds")
    v.add_argument("--suite", required=True, choices=sorted(ASSERT_SUITES | REPORT_SUITES))
    v.add_argument("--faces", type=int, default=None)
    v.add_argument("--rounds", type=int, default=None)
    v.add_argument("--limit", type=int, default=None)
    v.add_argument("--threshold", type=int, default=0, help="assumed constant C for pi-li")
    v.add_argument("--samples", type=int, default=200)
    common(v, ("text", "json"))
    v.set_defaults(func=cmd_verify)

    q = sub.add_parser("primes", help="prime counting and the logarithmic integral")
    g = q.add_mutually_exclusive_group(required=True)
    g.add_argument("--pi", type=int)
    g.add_argument("--window", type=_int_list)
    g.add_argument("--li", type=float)
    common(q, ("text", "json"))
    q.set_defaults(func=cmd_primes)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except (UsageError, CapacityError, ValueError) as exc:
        print(f"primedice {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
