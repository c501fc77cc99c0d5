#!/usr/bin/env python3
"""Full strategy benchmark under the falcon-like preset.

Reproduces the headline comparison: every lawful combination of the five
mitigation techniques at a 10^6 shot budget, five seeds, with bootstrap
uncertainty per strategy. Writes a run directory with JSON/CSV tables and
histogram plot data.

Usage:
    python scripts/run_benchmark.py [--out runs/benchmark] [--threads 4]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from qemlab.harness import (
    DEFAULT_STRATEGIES,
    ExperimentConfig,
    benchmark_matrix,
    write_run_dir,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/benchmark")
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--budget", type=int, default=10**6)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--resamples", type=int, default=1000)
    ap.add_argument("--noise", default="falcon_like")
    args = ap.parse_args()

    cfg = ExperimentConfig(
        noise=args.noise,
        budget=args.budget,
        strategies=DEFAULT_STRATEGIES,
        seeds=tuple(range(args.seeds)),
        resamples=args.resamples,
        out=args.out,
    )
    cfg.validate()
    t0 = time.time()
    report = benchmark_matrix(cfg, threads=args.threads)
    wall = time.time() - t0

    print(f"{'strategy':18s} {'bias/mHa':>10s} {'sigma/mHa':>10s} {'supp/%':>8s}")
    for row in sorted(
        report.rows, key=lambda r: abs(r.bias_mha) if not r.failed else 1e9
    ):
        if row.failed:
            print(f"{row.strategy:18s} FAILED: {row.reason}")
            continue
        supp = f"{row.suppression_pct:8.1f}" if row.suppression_pct is not None else "      --"
        print(f"{row.strategy:18s} {row.bias_mha:+10.3f} {row.sigma_mha:10.3f} {supp}")

    runtimes = {r.strategy: r.runtime_s for r in report.rows}
    root = write_run_dir(args.out, cfg, report, runtimes=runtimes)
    print(f"\n{wall:.1f} s total; wrote {root}")
    return 3 if report.any_failed else 0


if __name__ == "__main__":
    sys.exit(main())
