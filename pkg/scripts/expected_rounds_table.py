"""Expected stopping round for the standard face counts at a fixed depth.

    python scripts/expected_rounds_table.py --rounds 50 --out table.csv
"""
import argparse
import sys
import time

from primedice.asymptotics import TABLE_FACES, scan
from primedice.cli import scan_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=50)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    t0 = time.perf_counter()
    rows = scan(TABLE_FACES, args.rounds)
    text = scan_csv(rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"# {len(rows)} rows in {time.perf_counter() - t0:.2f} s", file=sys.stderr)


if __name__ == "__main__":
    main()
