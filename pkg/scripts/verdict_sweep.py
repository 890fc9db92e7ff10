"""Verdicts for every built-in scenario over a range of seeds."""

import argparse
import collections
import sys

from girsanov_kpz.fields import SCENARIOS, build_scenario
from girsanov_kpz.verify import Thresholds, run_verification


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--paths", type=int, default=200)
    ap.add_argument("--tau-abs", type=float, default=Thresholds.tau_abs)
    args = ap.parse_args(argv)

    th = Thresholds(tau_abs=args.tau_abs)
    dts = [1e-2, 5e-3, 2.5e-3]
    for name in SCENARIOS:
        sc = build_scenario(name)
        region = [(float(c) - 2, float(c) + 2) for c in sc.x0]
        counts = collections.Counter()
        for seed in range(1, args.seeds + 1):
            rep = run_verification(sc.fields, sc.potential, sc.x0, 1.0, dts, args.paths, seed,
                                   region, th)
            counts[rep.verdict.label] += 1
        print(f"{name:11s} expect {sc.expect:11s} " + ", ".join(f"{k}: {v}" for k, v in sorted(counts.items())))
    return 0


if __name__ == "__main__":
    sys.exit(main())
