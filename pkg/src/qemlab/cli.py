"""Command-line entry point.

Subcommands
-----------
vqe                train the ansatz angles on the noiseless simulator
ghz                GHZ fidelity decay versus register size, with and
                   without readout-error mitigation
bench              full strategy-by-strategy benchmark matrix
zne                extrapolation diagnostics: per-factor energies, WLS
                   and OLS fits, bootstrap fit band
validate-strategy  parse strategy names and print their canonical form
dump-hamiltonian   write the bundled Hamiltonian as JSON

Exit codes: 0 on success, 2 on configuration errors, 3 when a benchmark
finished but one or more strategies failed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import hcl
from .circuits import build_ansatz, build_ghz
from .harness import (
    BenchmarkReport,
    ConfigError,
    ExperimentConfig,
    VqeConfig,
    benchmark_matrix,
    ghz_benchmark,
    load_noise,
    vqe_train,
    write_ghz_dir,
    write_run_dir,
    write_zne_dir,
    zne_report,
)
from .mitigation import Strategy, StrategyError, all_strategies
from .pauli import dump_hamiltonian, ground_state, load_hamiltonian

__all__ = ["main"]


def _add_common(p: argparse.ArgumentParser) -> None:
    """Global flags, accepted both before and after the subcommand."""
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="base RNG seed (default 0)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="parallel strategy workers (default 1)")
    p.add_argument("--out", default=argparse.SUPPRESS,
                   help="output directory; created if missing")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip() != "")
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {e}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qemlab",
        description="Error-mitigation benchmark laboratory on simulated noisy backends.",
    )
    parser.set_defaults(seed=0, threads=1, out=None)
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p_vqe = sub.add_parser("vqe", help="train ansatz angles (noiseless, Adam)")
    _add_common(p_vqe)
    p_vqe.add_argument("--init", default="zeros",
                       help="zeros | optimal | random | six comma-separated angles")
    p_vqe.add_argument("--max-iter", type=int, default=500)
    p_vqe.add_argument("--lr", type=float, default=0.05)
    p_vqe.add_argument("--hamiltonian", default=None, metavar="FILE",
                       help="Pauli-sum JSON file (default: bundled molecule)")
    p_vqe.add_argument("--dump-circuit", action="store_true",
                       help="print the trained ansatz as a JSON gate list")
    p_vqe.set_defaults(func=_cmd_vqe)

    p_ghz = sub.add_parser("ghz", help="GHZ fidelity decay benchmark")
    _add_common(p_ghz)
    p_ghz.add_argument("--n-min", type=int, default=2)
    p_ghz.add_argument("--n-max", type=int, default=10)
    p_ghz.add_argument("--sizes", type=_int_list, default=None,
                       help="explicit comma-separated register sizes (overrides --n-min/--n-max)")
    p_ghz.add_argument("--shots", type=int, default=20000)
    p_ghz.add_argument("--noise", default="falcon_like",
                       help="preset name, JSON file, or 'none'")
    p_ghz.add_argument("--no-mem", action="store_true",
                       help="skip readout-error mitigation")
    p_ghz.add_argument("--cal-shots", type=int, default=8192,
                       help="calibration shots per preparation")
    p_ghz.add_argument("--dump-circuit", type=int, default=None, metavar="N",
                       help="print the N-qubit GHZ circuit as JSON and exit")
    p_ghz.set_defaults(func=_cmd_ghz)

    p_bench = sub.add_parser("bench", help="strategy benchmark matrix")
    _add_common(p_bench)
    p_bench.add_argument("--config", default=None, metavar="FILE",
                         help="experiment config JSON; flags below override it")
    p_bench.add_argument("--noise", default=None)
    p_bench.add_argument("--budget", type=int, default=None)
    p_bench.add_argument("--prelim-fraction", type=float, default=None)
    p_bench.add_argument("--strategies", default=None,
                         help="comma-separated names, or 'all' for the full matrix")
    p_bench.add_argument("--seeds", type=_int_list, default=None)
    p_bench.add_argument("--lambdas", type=_int_list, default=None)
    p_bench.add_argument("--resamples", type=int, default=None)
    p_bench.add_argument("--bootstrap-seed", type=int, default=None)
    p_bench.add_argument("--cal-shots", type=int, default=None)
    p_bench.add_argument("--params", default=None,
                         help="'optimal', 'train', or six comma-separated angles")
    p_bench.add_argument("--hamiltonian", default=None, metavar="FILE")
    p_bench.add_argument("--zne-method", default=None, choices=("WLS", "OLS", "wls", "ols"))
    p_bench.set_defaults(func=_cmd_bench)

    p_zne = sub.add_parser("zne", help="extrapolation fit diagnostics")
    _add_common(p_zne)
    p_zne.add_argument("--noise", default="falcon_like")
    p_zne.add_argument("--budget", type=int, default=10**6)
    p_zne.add_argument("--lambdas", type=_int_list, default=(1, 2, 3, 4))
    p_zne.add_argument("--resamples", type=int, default=1000)
    p_zne.add_argument("--band-resamples", type=int, default=200)
    p_zne.add_argument("--bootstrap-seed", type=int, default=0)
    p_zne.add_argument("--hamiltonian", default=None, metavar="FILE")
    p_zne.set_defaults(func=_cmd_zne)

    p_val = sub.add_parser("validate-strategy",
                           help="check strategy names and print canonical forms")
    _add_common(p_val)
    p_val.add_argument("names", nargs="*", metavar="NAME",
                       help="strategy names such as MEM+SV (default: list all valid)")
    p_val.set_defaults(func=_cmd_validate)

    p_dump = sub.add_parser("dump-hamiltonian", help="write the Hamiltonian as JSON")
    _add_common(p_dump)
    p_dump.add_argument("--hamiltonian", default=None, metavar="FILE",
                        help="round-trip an external file instead of the bundled one")
    p_dump.set_defaults(func=_cmd_dump_hamiltonian)

    return parser


def _parse_angles(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError as e:
        raise ConfigError(f"could not parse angles {text!r}: {e}") from e
    if len(vals) != 6:
        raise ConfigError(f"expected 6 angles, got {len(vals)}")
    return vals


def _cmd_vqe(args: argparse.Namespace) -> int:
    h = hcl.hamiltonian() if args.hamiltonian is None else load_hamiltonian(args.hamiltonian)
    init = args.init
    if init not in ("zeros", "optimal", "random"):
        init = _parse_angles(init)
    config = VqeConfig(learning_rate=args.lr, max_iter=args.max_iter)
    t0 = time.time()
    res = vqe_train(h, init=init, config=config, seed=args.seed)
    wall = time.time() - t0
    e_exact = ground_state(h)[0]
    print(f"iterations : {res.n_iter}")
    print(f"converged  : {res.converged}")
    print(f"energy     : {res.energy:.9f}")
    print(f"exact      : {e_exact:.9f}")
    print(f"error      : {(res.energy - e_exact) * 1e3:+.4f} mHa")
    print("angles     : " + ", ".join(f"{p:+.8f}" for p in res.params))
    if not res.converged:
        print("warning: optimizer did not reach the target within "
              f"{config.max_iter} iterations", file=sys.stderr)
    if args.dump_circuit:
        print(build_ansatz(res.params).to_json())
    if args.out:
        root = Path(args.out)
        (root / "plotdata").mkdir(parents=True, exist_ok=True)
        doc = {
            "command": "vqe",
            "seed": args.seed,
            "init": args.init,
            "learning_rate": args.lr,
            "max_iter": args.max_iter,
        }
        _dump_json(root / "config.json", doc)
        _dump_json(root / "results.json", {
            "params": list(res.params),
            "energy": res.energy,
            "e_exact": e_exact,
            "n_iter": res.n_iter,
            "converged": res.converged,
        })
        with open(root / "plotdata" / "energy_trace.csv", "w") as f:
            f.write("iteration,energy\n")
            for i, e in enumerate(res.trace):
                f.write(f"{i},{e!r}\n")
        _dump_json(root / "run_meta.json", {"wall_s": wall})
        print(f"wrote {root}")
    return 0


def _cmd_ghz(args: argparse.Namespace) -> int:
    if args.dump_circuit is not None:
        print(build_ghz(args.dump_circuit).to_json())
        return 0
    noise = load_noise(args.noise)
    sizes = args.sizes if args.sizes else range(args.n_min, args.n_max + 1)
    t0 = time.time()
    rows = ghz_benchmark(
        sizes,
        noise,
        shots=args.shots,
        with_mem=not args.no_mem,
        seed=args.seed,
        calibration_shots=args.cal_shots,
    )
    wall = time.time() - t0
    print(f"{'N':>3s} {'f_raw':>8s} {'f_mem':>8s} {'cnots':>6s}")
    for r in rows:
        mem = f"{r.f_mem:8.4f}" if r.f_mem is not None else "      --"
        print(f"{r.n_qubits:3d} {r.f_raw:8.4f} {mem} {r.cnot_count:6d}")
    if args.out:
        doc = {
            "command": "ghz",
            "seed": args.seed,
            "sizes": [r.n_qubits for r in rows],
            "shots": args.shots,
            "noise": args.noise,
            "with_mem": not args.no_mem,
            "calibration_shots": args.cal_shots,
        }
        root = write_ghz_dir(args.out, doc, rows)
        _dump_json(root / "run_meta.json", {"wall_s": wall})
        print(f"wrote {root}")
    return 0


def _bench_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_json_file(args.config)
    else:
        cfg = ExperimentConfig()
    updates: dict = {}
    if args.noise is not None:
        updates["noise"] = args.noise
    if args.budget is not None:
        updates["budget"] = args.budget
    if args.prelim_fraction is not None:
        updates["prelim_fraction"] = args.prelim_fraction
    if args.strategies is not None:
        if args.strategies.strip().lower() == "all":
            updates["strategies"] = tuple(s.name for s in all_strategies())
        else:
            updates["strategies"] = tuple(
                s.strip() for s in args.strategies.split(",") if s.strip()
            )
    if args.seeds is not None:
        updates["seeds"] = args.seeds
    if args.lambdas is not None:
        updates["lambdas"] = args.lambdas
    if args.resamples is not None:
        updates["resamples"] = args.resamples
    if args.bootstrap_seed is not None:
        updates["bootstrap_seed"] = args.bootstrap_seed
    if args.cal_shots is not None:
        updates["calibration_shots"] = args.cal_shots
    if args.params is not None:
        params = args.params
        if params not in ("optimal", "train"):
            params = _parse_angles(params)
        updates["params"] = params
    if args.hamiltonian is not None:
        updates["hamiltonian"] = args.hamiltonian
    if args.zne_method is not None:
        updates["zne_method"] = args.zne_method.upper()
    if args.out is not None:
        updates["out"] = args.out
    if updates:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **updates})
    return cfg


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _bench_config(args)
    cfg.validate()
    t0 = time.time()
    report = benchmark_matrix(cfg, threads=args.threads)
    wall = time.time() - t0
    print(f"{'strategy':18s} {'bias/mHa':>10s} {'sigma/mHa':>10s} "
          f"{'supp/%':>8s} {'retain':>7s} {'R2':>6s}")
    for row in report.rows:
        if row.failed:
            print(f"{row.strategy:18s} FAILED: {row.reason}")
            continue
        supp = f"{row.suppression_pct:8.1f}" if row.suppression_pct is not None else "      --"
        ret = f"{row.retention:7.3f}" if row.retention is not None else "     --"
        r2 = f"{row.r_squared:6.3f}" if row.r_squared is not None else "    --"
        print(f"{row.strategy:18s} {row.bias_mha:+10.3f} {row.sigma_mha:10.3f} "
              f"{supp} {ret} {r2}")
    print(f"({wall:.1f} s, exact energy {report.e_exact:.6f})")
    if cfg.out:
        runtimes = {r.strategy: r.runtime_s for r in report.rows}
        root = write_run_dir(cfg.out, cfg, report, runtimes=runtimes)
        print(f"wrote {root}")
    return 3 if report.any_failed else 0


def _cmd_zne(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig(
        hamiltonian=args.hamiltonian,
        noise=args.noise,
        budget=args.budget,
        lambdas=args.lambdas,
        strategies=("ZNE",),
        seeds=(args.seed,),
        resamples=args.resamples,
        bootstrap_seed=args.bootstrap_seed,
        out=args.out,
    )
    cfg.validate()
    report = zne_report(cfg, seed=args.seed, band_resamples=args.band_resamples)
    print(f"{'lambda':>6s} {'energy':>14s} {'sigma/mHa':>10s}")
    for lam, e, v in report.points:
        print(f"{lam:6d} {e:14.6f} {np.sqrt(v) * 1e3:10.3f}")
    for fit in (report.wls, report.ols):
        print(f"{fit['method']}: intercept {fit['intercept']:.6f} "
              f"+- {fit['stderr']:.6f}, slope {fit['slope']:+.6f}, "
              f"R2 {fit['r_squared']:.4f}")
    print(f"band coverage of point fit: {report.coverage:.2f}")
    print(f"exact energy: {report.e_exact:.6f}")
    if args.out:
        doc = {
            "command": "zne",
            "seed": args.seed,
            "noise": args.noise,
            "budget": args.budget,
            "lambdas": list(args.lambdas),
            "resamples": args.resamples,
            "band_resamples": args.band_resamples,
            "bootstrap_seed": args.bootstrap_seed,
        }
        root = write_zne_dir(args.out, doc, report)
        print(f"wrote {root}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    if not args.names:
        for s in all_strategies():
            print(s.name)
        return 0
    bad = 0
    for name in args.names:
        try:
            s = Strategy.parse(name)
        except StrategyError as e:
            print(f"{name}: INVALID ({e})")
            bad += 1
        else:
            print(f"{name}: ok -> {s.name}")
    return 2 if bad else 0


def _cmd_dump_hamiltonian(args: argparse.Namespace) -> int:
    h = hcl.hamiltonian() if args.hamiltonian is None else load_hamiltonian(args.hamiltonian)
    doc = {
        "n_qubits": h.n_qubits,
        "terms": [{"pauli": p.label, "coeff": c} for p, c in h.terms],
    }
    if args.out:
        path = Path(args.out)
        if path.suffix != ".json":
            path.mkdir(parents=True, exist_ok=True)
            path = path / "hamiltonian.json"
        dump_hamiltonian(h, path)
        print(f"wrote {path}")
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _dump_json(path: Path, doc: dict) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (StrategyError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
