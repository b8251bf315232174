"""Per-round survivor and hit probabilities against the geometric envelopes.

Rounds 1..floor((log M)^3) are checked; envelopes built on
L = log M - 4 log log M are skipped while L <= 1, which covers every
M below roughly 3.1e4.
"""
import argparse
import json

from primedice.asymptotics import envelope_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--faces", default="10,16,100,1000")
    ap.add_argument("--max-rounds", type=int, default=None)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    reports = envelope_sweep([int(f) for f in args.faces.split(",")], args.max_rounds)
    if args.json:
        print(json.dumps([r.to_dict() for r in reports], indent=1))
        return
    for rep in reports:
        applicable = rep.applicable()
        print(f"M={rep.M}  R1={rep.R1}  rounds={rep.rounds_checked}  L={rep.L:.4f}  U={rep.U:.4f}")
        for name, count in rep.violations().items():
            state = f"{count} violations" if applicable[name] else "not applicable"
            print(f"  {name:14s} {state}")
        for note in rep.notes:
            print(f"  note: {note}")


if __name__ == "__main__":
    main()
