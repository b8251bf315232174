"""E(tau) against log M in auto mode, with the implied constant per row.

    python scripts/asymptotic_scan.py --faces 100,1000,10000,100000 --eps 1e-9
"""
import argparse
import time

from primedice.asymptotics import scan, theorem_check


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--faces", default="100,1000,10000,100000")
    ap.add_argument("--eps", type=float, default=1e-9)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    faces = [int(f) for f in args.faces.split(",")]

    t0 = time.perf_counter()
    rows = scan(faces, None, eps=args.eps, threads=args.threads)
    print(f"{'M':>8} {'R':>5} {'E':>10} {'log M':>8} {'diff':>8} {'c':>7}  status")
    for r in rows:
        c = f"{r.implied_c:7.3f}" if r.implied_c is not None else "      -"
        print(f"{r.M:8d} {r.R:5d} {r.E_total:10.5f} {r.log_M:8.4f} {r.diff:8.4f} {c}  {r.status}")
    if sum(r.loglog_M is not None for r in rows) >= 2:
        tc = theorem_check(rows)
        print(f"max |c| = {tc['max_abs_implied_constant']:.4f}, E > log M for all: {tc['diff_positive_all']}")
    print(f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
