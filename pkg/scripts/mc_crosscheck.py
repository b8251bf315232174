"""Monte Carlo means against the DP for a few face counts."""
import argparse

from primedice.montecarlo import SimConfig, compare_to_dp, simulate
from primedice.prime_engine import TargetSet, build_sieve
from primedice.stopping_dp import expectation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--faces", default="2,6,100")
    ap.add_argument("--trials", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    faces = [int(f) for f in args.faces.split(",")]
    cfgs = [SimConfig(faces=M, trials=args.trials, seed=args.seed) for M in faces]
    target = TargetSet.primes(build_sieve(max(c.faces * c.horizon for c in cfgs)))
    print(f"{'M':>6} {'sim mean':>10} {'stderr':>9} {'DP':>10} {'z':>7} {'chi2/dof':>12} {'p':>7}")
    for cfg in cfgs:
        sim = simulate(cfg, target=target, threads=args.threads)
        c = compare_to_dp(sim, expectation(cfg.faces, None, target=target))
        flag = "  FLAG" if c.flagged else ""
        print(f"{cfg.faces:6d} {c.sim_mean:10.5f} {c.sim_stderr:9.2e} {c.exact_mean:10.5f} "
              f"{c.z:+7.2f} {c.chi2:7.1f}/{c.dof:<4d} {c.p_value:7.3f}{flag}")
        for note in c.notes:
            print(f"       note: {note}")


if __name__ == "__main__":
    main()
