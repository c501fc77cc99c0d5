#!/usr/bin/env python3
"""GHZ fidelity decay versus register size, raw and readout-mitigated.

Scans N from 2 up to 21 qubits on the trajectory engine and writes the
fidelity table plus figure-ready decay data.

Usage:
    python scripts/run_ghz_scan.py [--n-max 21] [--shots 20000]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from qemlab.harness import ghz_benchmark, load_noise, write_ghz_dir


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/ghz")
    ap.add_argument("--n-min", type=int, default=2)
    ap.add_argument("--n-max", type=int, default=21)
    ap.add_argument("--shots", type=int, default=20000)
    ap.add_argument("--noise", default="falcon_like")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    noise = load_noise(args.noise)
    rows = ghz_benchmark(
        range(args.n_min, args.n_max + 1), noise, shots=args.shots, seed=args.seed
    )
    print(f"{'N':>3s} {'f_raw':>8s} {'f_mem':>8s} {'gain':>7s}")
    for r in rows:
        print(
            f"{r.n_qubits:3d} {r.f_raw:8.4f} {r.f_mem:8.4f} "
            f"{r.f_mem - r.f_raw:+7.4f}"
        )
    doc = {
        "command": "ghz-scan",
        "seed": args.seed,
        "shots": args.shots,
        "noise": args.noise,
    }
    root = write_ghz_dir(args.out, doc, rows)
    print(f"wrote {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
