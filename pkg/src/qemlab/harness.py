"""Experiment orchestration: VQE training, GHZ fidelity scans, the full
strategy benchmark matrix, and extrapolation fit reports.

Every experiment writes a self-contained run directory:

    <out>/config.json       echo of the configuration that produced the run
    <out>/results.json      deterministic results (byte-identical per config+seed)
    <out>/results.csv       flat table of the same rows
    <out>/plotdata/*.csv    figure-ready data (histograms, fit lines, decays)
    <out>/run_meta.json     wall-clock timings and environment (not deterministic)

Timings live only in run_meta.json so that results.json stays byte-identical
across reruns of the same configuration.
"""

from __future__ import annotations

import csv
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import hcl
from .circuits import Circuit, CouplingMap, amplify_noise, build_ansatz, build_ghz
from .mitigation import (
    AssignmentMatrix,
    EstimationError,
    EstimatorResult,
    Strategy,
    StrategyError,
    SymmetryConstraint,
    estimate_from_sets,
    mem_apply,
    mem_build,
    preliminary_estimates,
    run_strategy,
    simulate_calibration,
    zne_fit,
)
from .noisy_sim import (
    MeasurementSet,
    NoiseModel,
    derive_rng,
    ghz_fidelity,
    run_trajectories,
    statevector,
)
from .pauli import PauliSum, expectation, ground_state, load_hamiltonian
from .stats import bootstrap, plan_shots, resample_sets

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "VqeConfig",
    "VqeResult",
    "vqe_train",
    "parameter_shift_gradient",
    "finite_difference_gradient",
    "GhzRow",
    "ghz_benchmark",
    "StrategyRow",
    "BenchmarkReport",
    "benchmark_matrix",
    "run_strategy_pipeline",
    "ZneReport",
    "zne_report",
    "write_run_dir",
    "load_noise",
    "CHEMICAL_PRECISION_HA",
]

CHEMICAL_PRECISION_HA = 1.6e-3

SCHEMA_VERSION = 1

DEFAULT_STRATEGIES = (
    "RAW",
    "MEM",
    "SV",
    "ZNE",
    "DSP",
    "MEM+SV",
    "MEM+ZNE",
    "MEM+DSP",
    "SV+ZNE",
    "DSP+TP",
    "DSP+ZNE",
    "MEM+SV+ZNE",
    "MEM+DSP+ZNE",
    "MEM+DSP+TP",
    "DSP+TP+ZNE",
    "MEM+DSP+TP+ZNE",
)


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


def load_noise(spec: str | None) -> NoiseModel:
    """Resolve a noise preset name or a JSON file path."""
    if spec is None or spec == "" or spec.lower() in ("none", "noiseless", "zero"):
        return NoiseModel.noiseless()
    name = spec.lower().replace("-", "_")
    if name == "falcon_like":
        return NoiseModel.falcon_like()
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"noise spec {spec!r} is neither a preset nor a file")
    try:
        return NoiseModel.from_json(path.read_text())
    except (ValueError, KeyError) as e:
        raise ConfigError(f"invalid noise file {spec}: {e}") from e


def _load_hamiltonian(path: str | None) -> PauliSum:
    if path is None:
        return hcl.hamiltonian()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"hamiltonian file not found: {path}")
    try:
        return load_hamiltonian(p)
    except ValueError as e:
        raise ConfigError(f"invalid hamiltonian file {path}: {e}") from e


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a benchmark run."""

    hamiltonian: str | None = None
    params: tuple[float, ...] | str = "optimal"
    noise: str = "falcon_like"
    strategies: tuple[str, ...] = DEFAULT_STRATEGIES
    budget: int = 10**6
    prelim_fraction: float = 0.001
    lambdas: tuple[int, ...] = (1, 2, 3, 4)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    resamples: int = 1000
    bootstrap_seed: int = 0
    calibration_shots: int = 20000
    coupling: str = "dsp_cluster"
    zne_method: str = "WLS"
    out: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "lambdas", tuple(int(l) for l in self.lambdas))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if isinstance(self.params, (list, tuple)):
            object.__setattr__(
                self, "params", tuple(float(x) for x in self.params)
            )

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported config schema version {self.schema_version}"
            )
        if self.budget < 1:
            raise ConfigError("budget must be positive")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        for name in self.strategies:
            try:
                Strategy.parse(name)
            except StrategyError as e:
                raise ConfigError(f"invalid strategy {name!r}: {e}") from e
        if self.coupling not in ("dsp_cluster", "all_to_all"):
            raise ConfigError(f"unknown coupling {self.coupling!r}")
        if self.zne_method.upper() not in ("WLS", "OLS"):
            raise ConfigError(f"unknown fit method {self.zne_method!r}")
        if isinstance(self.params, str) and self.params not in ("optimal", "train"):
            raise ConfigError(
                "params must be a 6-vector, 'optimal', or 'train'"
            )
        _load_hamiltonian(self.hamiltonian)
        load_noise(self.noise)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "hamiltonian": self.hamiltonian,
            "params": list(self.params)
            if isinstance(self.params, tuple)
            else self.params,
            "noise": self.noise,
            "strategies": list(self.strategies),
            "budget": self.budget,
            "prelim_fraction": self.prelim_fraction,
            "lambdas": list(self.lambdas),
            "seeds": list(self.seeds),
            "resamples": self.resamples,
            "bootstrap_seed": self.bootstrap_seed,
            "calibration_shots": self.calibration_shots,
            "coupling": self.coupling,
            "zne_method": self.zne_method,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(doc)
        if "params" in kwargs and isinstance(kwargs["params"], list):
            kwargs["params"] = tuple(kwargs["params"])
        for key in ("strategies", "lambdas", "seeds"):
            if key in kwargs:
                value = kwargs[key]
                if not isinstance(value, (list, tuple)):
                    raise ConfigError(
                        f"config key {key!r} must be a list, got {type(value).__name__}"
                    )
                kwargs[key] = tuple(value)
        try:
            cfg = cls(**kwargs)
        except TypeError as e:
            raise ConfigError(str(e)) from e
        return cfg

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
        return cls.from_dict(doc)


# ---------------------------------------------------------------------------
# VQE training


@dataclass(frozen=True)
class VqeConfig:
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iter: int = 500


@dataclass(frozen=True)
class VqeResult:
    params: tuple[float, ...]
    energy: float
    trace: tuple[float, ...]
    n_iter: int
    converged: bool
    target: float | None


def _ansatz_energy(h: PauliSum, params: Sequence[float]) -> float:
    return expectation(h, statevector(build_ansatz(params)))


def parameter_shift_gradient(
    h: PauliSum, params: Sequence[float]
) -> np.ndarray:
    """Exact gradient: each angle feeds one rotation with eigenvalue gap 1,
    so g_k = (E(theta_k + pi/2) - E(theta_k - pi/2)) / 2."""
    theta = np.asarray(params, dtype=float)
    g = np.zeros_like(theta)
    for k in range(theta.size):
        plus = theta.copy()
        minus = theta.copy()
        plus[k] += math.pi / 2
        minus[k] -= math.pi / 2
        g[k] = 0.5 * (_ansatz_energy(h, plus) - _ansatz_energy(h, minus))
    return g


def finite_difference_gradient(
    h: PauliSum, params: Sequence[float], step: float = 1e-5
) -> np.ndarray:
    theta = np.asarray(params, dtype=float)
    g = np.zeros_like(theta)
    for k in range(theta.size):
        plus = theta.copy()
        minus = theta.copy()
        plus[k] += step
        minus[k] -= step
        g[k] = (_ansatz_energy(h, plus) - _ansatz_energy(h, minus)) / (2 * step)
    return g


def vqe_train(
    h: PauliSum,
    init: Sequence[float] | str = "zeros",
    config: VqeConfig = VqeConfig(),
    target: float | None = None,
    seed=None,
) -> VqeResult:
    """Adam descent over the six ansatz angles on noiseless statevectors.

    Stops early once the energy reaches ``target`` (default: exact ground
    energy plus chemical precision). Non-convergence is reported through the
    ``converged`` flag, not an exception.
    """
    if isinstance(init, str):
        if init == "zeros":
            theta = np.zeros(6)
        elif init == "optimal":
            theta = np.array(hcl.OPTIMAL_ANGLES)
        elif init == "random":
            rng = derive_rng(seed, "vqe-init")
            theta = rng.uniform(-math.pi, math.pi, size=6)
        else:
            raise ConfigError(f"unknown init {init!r}")
    else:
        theta = np.asarray(init, dtype=float).copy()
        if theta.shape != (6,):
            raise ConfigError("ansatz takes exactly 6 angles")
    if target is None:
        target = ground_state(h)[0] + CHEMICAL_PRECISION_HA

    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    trace = [_ansatz_energy(h, theta)]
    best_e = trace[0]
    best_theta = theta.copy()
    converged = best_e <= target
    n_iter = 0
    for t in range(1, config.max_iter + 1):
        if converged:
            break
        g = parameter_shift_gradient(h, theta)
        m = config.beta1 * m + (1 - config.beta1) * g
        v = config.beta2 * v + (1 - config.beta2) * g * g
        m_hat = m / (1 - config.beta1**t)
        v_hat = v / (1 - config.beta2**t)
        theta = theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        e = _ansatz_energy(h, theta)
        trace.append(e)
        n_iter = t
        if e < best_e:
            best_e = e
            best_theta = theta.copy()
        if e <= target:
            converged = True
    return VqeResult(
        params=tuple(best_theta),
        energy=best_e,
        trace=tuple(trace),
        n_iter=n_iter,
        converged=converged,
        target=target,
    )


# ---------------------------------------------------------------------------
# GHZ benchmark


@dataclass(frozen=True)
class GhzRow:
    n_qubits: int
    f_raw: float
    f_mem: float | None
    cnot_count: int


def _pole_fidelity(p0: float, p1: float) -> float:
    a = math.sqrt(max(p0, 0.0))
    b = math.sqrt(max(p1, 0.0))
    return 0.5 * (a + b) ** 2


def ghz_benchmark(
    n_range: Sequence[int],
    noise: NoiseModel,
    shots: int,
    with_mem: bool = True,
    seed=0,
    calibration_shots: int = 8192,
) -> list[GhzRow]:
    """Entangled-state fidelity decay versus register size.

    Fidelity is estimated from the two pole populations; the mitigated
    column inverts per-qubit readout errors first (lazy evaluation keeps
    the 21-qubit case tractable).
    """
    rows = []
    for n in n_range:
        if n < 2:
            raise ConfigError("GHZ benchmark needs at least 2 qubits")
        c = build_ghz(n)
        m = run_trajectories(c, noise, shots, derive_rng(seed, "ghz", n))
        f_raw = ghz_fidelity(m)
        f_mem = None
        if with_mem:
            cal = simulate_calibration(
                n, noise, calibration_shots, (seed, "ghz-cal", n)
            )
            assignment = mem_build(cal, n)
            q = mem_apply(assignment, m)
            f_mem = _pole_fidelity(q.prob("0" * n), q.prob("1" * n))
        rows.append(
            GhzRow(
                n_qubits=n,
                f_raw=f_raw,
                f_mem=f_mem,
                cnot_count=c.count("CNOT"),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Strategy pipeline and benchmark matrix


@dataclass
class StrategyRow:
    strategy: str
    failed: bool = False
    reason: str | None = None
    bias_mha: float | None = None
    sigma_mha: float | None = None
    mse: float | None = None
    suppression_pct: float | None = None
    retention: float | None = None
    r_squared: float | None = None
    consumed_shots: int | None = None
    per_seed: list = field(default_factory=list)
    runtime_s: float = 0.0
    histogram: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self, include_runtime: bool = False) -> dict:
        doc = {
            "strategy": self.strategy,
            "failed": self.failed,
            "reason": self.reason,
            "bias_mha": self.bias_mha,
            "sigma_mha": self.sigma_mha,
            "mse": self.mse,
            "suppression_pct": self.suppression_pct,
            "retention": self.retention,
            "r_squared": self.r_squared,
            "consumed_shots": self.consumed_shots,
            "per_seed": self.per_seed,
        }
        if include_runtime:
            doc["runtime_s"] = self.runtime_s
        return doc


@dataclass
class BenchmarkReport:
    e_exact: float
    budget: int
    rows: list[StrategyRow]

    @property
    def any_failed(self) -> bool:
        return any(r.failed for r in self.rows)

    def row(self, name: str) -> StrategyRow:
        for r in self.rows:
            if r.strategy == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "e_exact": self.e_exact,
            "budget": self.budget,
            "rows": [r.to_dict() for r in self.rows],
        }


def _resolve_params(
    cfg: ExperimentConfig, h: PauliSum
) -> tuple[float, ...]:
    if isinstance(cfg.params, tuple):
        if len(cfg.params) != 6:
            raise ConfigError("ansatz takes exactly 6 angles")
        return cfg.params
    if cfg.params == "optimal":
        return hcl.OPTIMAL_ANGLES
    if cfg.params == "train":
        return vqe_train(h).params
    raise ConfigError(f"unresolvable params {cfg.params!r}")


def _resolve_coupling(cfg: ExperimentConfig) -> CouplingMap | None:
    return CouplingMap.dsp_cluster() if cfg.coupling == "dsp_cluster" else None


def _default_constraint(h: PauliSum) -> SymmetryConstraint | None:
    try:
        return SymmetryConstraint.build(
            [
                (hcl.number_operator(), (float(hcl.N_ELECTRONS),)),
                (hcl.spin_z_operator(), hcl.ALLOWED_SPIN_VALUES),
            ],
            hamiltonian=h,
        )
    except ValueError:
        return None


def run_strategy_pipeline(
    s: Strategy,
    h: PauliSum,
    params: Sequence[float],
    noise: NoiseModel,
    cfg: ExperimentConfig,
    seed: int,
    constraint: SymmetryConstraint | None,
    coupling: CouplingMap | None,
) -> tuple[EstimatorResult, Callable[[Mapping], EstimatorResult]]:
    """Full single-seed pipeline: preliminary phase, planning, calibration,
    measurement, estimation. Returns the result plus a pure re-estimator
    over resampled measurement sets for bootstrapping."""
    mode = s.plan_mode()
    blank = {p.label: 0.0 for p, _ in h.non_identity_terms()}
    prelim_plan = plan_shots(
        h, blank, cfg.budget, cfg.prelim_fraction, mode=mode, lambdas=cfg.lambdas
    )
    prelim = preliminary_estimates(
        h, params, noise, prelim_plan.preliminary, seed
    )
    plan = plan_shots(
        h, prelim, cfg.budget, cfg.prelim_fraction, mode=mode, lambdas=cfg.lambdas
    )
    assignment = None
    if "MEM" in s:
        nq = h.n_qubits + 1 if "DSP" in s else h.n_qubits
        cal = simulate_calibration(
            nq, noise, cfg.calibration_shots, (seed, "mem-cal")
        )
        assignment = mem_build(cal, nq)
    result = run_strategy(
        s,
        h,
        params,
        noise,
        plan,
        seed,
        assignment=assignment,
        constraint=constraint,
        coupling=coupling,
        zne_method=cfg.zne_method,
    )

    def reestimate(sets: Mapping) -> EstimatorResult:
        return estimate_from_sets(
            s,
            h,
            plan,
            sets,
            assignment=assignment,
            constraint=constraint,
            zne_method=cfg.zne_method,
        )

    return result, reestimate


def _run_one_strategy(
    name: str,
    h: PauliSum,
    params: tuple[float, ...],
    noise: NoiseModel,
    cfg: ExperimentConfig,
    e_exact: float,
    constraint: SymmetryConstraint | None,
    coupling: CouplingMap | None,
) -> StrategyRow:
    row = StrategyRow(strategy=name)
    t0 = time.perf_counter()
    try:
        s = Strategy.parse(name)
        hists = []
        for seed in cfg.seeds:
            result, reestimate = run_strategy_pipeline(
                s, h, params, noise, cfg, seed, constraint, coupling
            )
            if result.consumed_shots != cfg.budget:
                raise EstimationError(
                    f"budget accounting off: consumed {result.consumed_shots}"
                    f" != {cfg.budget}"
                )
            boot = bootstrap(
                result.sets,
                lambda sets: reestimate(sets).energy,
                resamples=cfg.resamples,
                seed=(cfg.bootstrap_seed, name, seed),
            )
            hists.append(boot.estimates)
            row.per_seed.append(
                {
                    "seed": seed,
                    "energy": result.energy,
                    "bias_mha": (result.energy - e_exact) * 1e3,
                    "sigma_mha": boot.sigma * 1e3,
                    "analytic_sigma_mha": result.sigma * 1e3,
                    "retention": result.retention,
                    "r_squared": None if result.fit is None else result.fit.r_squared,
                    "p_normal": boot.p_normal,
                    "consumed_shots": result.consumed_shots,
                }
            )
        biases = [d["bias_mha"] for d in row.per_seed]
        sigmas = [d["sigma_mha"] for d in row.per_seed]
        row.bias_mha = float(np.mean(biases))
        row.sigma_mha = float(np.mean(sigmas))
        row.mse = float((row.bias_mha * 1e-3) ** 2 + (row.sigma_mha * 1e-3) ** 2)
        rets = [d["retention"] for d in row.per_seed if d["retention"] is not None]
        row.retention = float(np.mean(rets)) if rets else None
        r2s = [d["r_squared"] for d in row.per_seed if d["r_squared"] is not None]
        row.r_squared = float(np.mean(r2s)) if r2s else None
        row.consumed_shots = cfg.budget
        row.histogram = np.concatenate(hists)
    except (StrategyError, EstimationError, ValueError) as e:
        row.failed = True
        row.reason = str(e)
        row.per_seed = []
    row.runtime_s = time.perf_counter() - t0
    return row


def benchmark_matrix(cfg: ExperimentConfig, threads: int = 1) -> BenchmarkReport:
    """Run every requested strategy across the seed set and tabulate metrics.

    Per-strategy failures are recorded with their reason and do not abort
    the rest of the matrix. Suppression is quoted against the RAW row when
    present (per-seed pairing is recorded in per_seed).
    """
    cfg.validate()
    h = _load_hamiltonian(cfg.hamiltonian)
    noise = load_noise(cfg.noise)
    params = _resolve_params(cfg, h)
    e_exact = ground_state(h)[0]
    constraint = _default_constraint(h) if h.n_qubits == 3 else None
    coupling = _resolve_coupling(cfg)

    def job(name: str) -> StrategyRow:
        return _run_one_strategy(
            name, h, params, noise, cfg, e_exact, constraint, coupling
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, cfg.strategies))
    else:
        rows = [job(name) for name in cfg.strategies]

    raw_row = next((r for r in rows if r.strategy == "RAW" and not r.failed), None)
    for r in rows:
        if r.failed or raw_row is None:
            continue
        if raw_row.bias_mha not in (None, 0.0):
            r.suppression_pct = (
                1.0 - abs((r.bias_mha or 0.0) / raw_row.bias_mha)
            ) * 100.0
            for d, draw in zip(r.per_seed, raw_row.per_seed):
                if draw["bias_mha"] != 0.0:
                    d["suppression_pct"] = (
                        1.0 - abs(d["bias_mha"] / draw["bias_mha"])
                    ) * 100.0
    return BenchmarkReport(e_exact=e_exact, budget=cfg.budget, rows=rows)


# ---------------------------------------------------------------------------
# ZNE report


@dataclass
class ZneReport:
    points: list[tuple[int, float, float]]
    wls: dict
    ols: dict
    band_grid: list[float]
    band_lo: list[float]
    band_hi: list[float]
    coverage: float
    e_exact: float

    def to_dict(self) -> dict:
        return {
            "points": [
                {"lambda": l, "energy": e, "variance": v}
                for (l, e, v) in self.points
            ],
            "wls": self.wls,
            "ols": self.ols,
            "band": [
                {"lambda": g, "lo": lo, "hi": hi}
                for g, lo, hi in zip(self.band_grid, self.band_lo, self.band_hi)
            ],
            "coverage": self.coverage,
            "e_exact": self.e_exact,
        }


def zne_report(
    cfg: ExperimentConfig,
    seed: int | None = None,
    band_resamples: int = 200,
) -> ZneReport:
    """Extrapolation diagnostics: per-factor energies, WLS and OLS fits, and
    a bootstrap confidence band over refitted lines."""
    cfg.validate()
    h = _load_hamiltonian(cfg.hamiltonian)
    noise = load_noise(cfg.noise)
    params = _resolve_params(cfg, h)
    e_exact = ground_state(h)[0]
    constraint = _default_constraint(h) if h.n_qubits == 3 else None
    coupling = _resolve_coupling(cfg)
    seed = cfg.seeds[0] if seed is None else seed
    s = Strategy.parse("ZNE")
    result, reestimate = run_strategy_pipeline(
        s, h, params, noise, cfg, seed, constraint, coupling
    )
    points = [(l, e, v) for (l, e, v) in result.per_lambda]
    wls = zne_fit(points, method="WLS")
    ols = zne_fit(points, method="OLS")

    # bootstrap band: resample every measurement set, refit the amplified
    # series, and take central quantiles of the fitted line per grid value
    rng = derive_rng((cfg.bootstrap_seed, "zne-band", seed), "band")
    grid = np.linspace(0.0, float(max(p[0] for p in points)), 41)
    lines = np.empty((band_resamples, grid.size))
    for i in range(band_resamples):
        fit_i = reestimate(resample_sets(result.sets, rng)).fit
        lines[i] = fit_i.intercept + fit_i.slope * grid
    lo = np.quantile(lines, 0.025, axis=0)
    hi = np.quantile(lines, 0.975, axis=0)
    point_line = wls.intercept + wls.slope * grid
    coverage = float(np.mean((point_line >= lo) & (point_line <= hi)))

    def fitdoc(f) -> dict:
        return {
            "intercept": f.intercept,
            "slope": f.slope,
            "r_squared": f.r_squared,
            "stderr": f.stderr,
            "method": f.method,
        }

    return ZneReport(
        points=points,
        wls=fitdoc(wls),
        ols=fitdoc(ols),
        band_grid=[float(g) for g in grid],
        band_lo=[float(x) for x in lo],
        band_hi=[float(x) for x in hi],
        coverage=coverage,
        e_exact=e_exact,
    )


# ---------------------------------------------------------------------------
# Persistence


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_run_dir(
    out: str | Path,
    cfg: ExperimentConfig,
    report: BenchmarkReport,
    runtimes: Mapping[str, float] | None = None,
) -> Path:
    """Persist a benchmark run: config echo, deterministic results, plot data."""
    root = Path(out)
    (root / "plotdata").mkdir(parents=True, exist_ok=True)
    _write_json(root / "config.json", cfg.to_dict())
    _write_json(root / "results.json", report.to_dict())
    header = [
        "strategy",
        "bias_mha",
        "sigma_mha",
        "mse",
        "suppression_pct",
        "retention",
        "r_squared",
        "consumed_shots",
        "failed",
        "reason",
    ]
    rows = [
        [
            r.strategy,
            r.bias_mha,
            r.sigma_mha,
            r.mse,
            r.suppression_pct,
            r.retention,
            r.r_squared,
            r.consumed_shots,
            r.failed,
            r.reason or "",
        ]
        for r in report.rows
    ]
    _write_csv(root / "results.csv", header, rows)
    for r in report.rows:
        hist = getattr(r, "histogram", None)
        if hist is None or r.failed:
            continue
        counts, edges = np.histogram(np.asarray(hist), bins=40)
        name = r.strategy.replace("+", "_").lower()
        _write_csv(
            root / "plotdata" / f"hist_{name}.csv",
            ["bin_left", "bin_right", "count"],
            [
                [float(edges[i]), float(edges[i + 1]), int(c)]
                for i, c in enumerate(counts)
            ],
        )
    meta = {
        "wall_s": sum((runtimes or {}).values()),
        "runtimes_s": dict(runtimes or {}),
        "python": sys.version.split()[0],
    }
    _write_json(root / "run_meta.json", meta)
    return root


def write_ghz_dir(
    out: str | Path, config_echo: Mapping, rows: Sequence[GhzRow]
) -> Path:
    root = Path(out)
    (root / "plotdata").mkdir(parents=True, exist_ok=True)
    _write_json(root / "config.json", dict(config_echo))
    _write_json(
        root / "results.json",
        {
            "rows": [
                {
                    "n_qubits": r.n_qubits,
                    "f_raw": r.f_raw,
                    "f_mem": r.f_mem,
                    "cnot_count": r.cnot_count,
                }
                for r in rows
            ]
        },
    )
    _write_csv(
        root / "results.csv",
        ["n_qubits", "f_raw", "f_mem", "cnot_count"],
        [[r.n_qubits, r.f_raw, r.f_mem, r.cnot_count] for r in rows],
    )
    _write_csv(
        root / "plotdata" / "fidelity_decay.csv",
        ["n_qubits", "f_raw", "f_mem"],
        [[r.n_qubits, r.f_raw, r.f_mem] for r in rows],
    )
    return root


def write_zne_dir(
    out: str | Path, config_echo: Mapping, report: ZneReport
) -> Path:
    root = Path(out)
    (root / "plotdata").mkdir(parents=True, exist_ok=True)
    _write_json(root / "config.json", dict(config_echo))
    _write_json(root / "results.json", report.to_dict())
    _write_csv(
        root / "plotdata" / "zne_points.csv",
        ["lambda", "energy", "variance"],
        [[l, e, v] for (l, e, v) in report.points],
    )
    _write_csv(
        root / "plotdata" / "zne_band.csv",
        ["lambda", "wls_line", "ols_line", "band_lo", "band_hi"],
        [
            [
                g,
                report.wls["intercept"] + report.wls["slope"] * g,
                report.ols["intercept"] + report.ols["slope"] * g,
                lo,
                hi,
            ]
            for g, lo, hi in zip(
                report.band_grid, report.band_lo, report.band_hi
            )
        ],
    )
    return root
