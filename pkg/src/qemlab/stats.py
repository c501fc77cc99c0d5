"""Shot-budget planning, bootstrap resampling, and normality checking.

The planner splits a total budget B between a preliminary phase (fraction b,
divided equally across Hamiltonian terms to get rough variances) and a main
phase allocated proportionally to v_P = |h_P| sqrt(1 - <P>^2). Each term's
main allotment is then divided across its measurement cells: one per noise
factor under extrapolation, one per ancilla basis under purification.

All integer rounding uses the largest-remainder method so the plan conserves
the budget exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .noisy_sim import MeasurementSet, derive_rng
from .pauli import PauliSum

__all__ = [
    "ShotPlan",
    "plan_shots",
    "plan_mode_layout",
    "BootstrapReport",
    "bootstrap",
    "resample_sets",
    "SigmaAgreement",
    "sigma_agreement",
    "dagostino_pearson",
]

PLAN_MODES = ("plain", "zne", "dsp", "dsp+zne", "dsp+tp", "dsp+tp+zne")

FLOOR_SHOTS = 100


def plan_mode_layout(
    mode: str, lambdas: Sequence[int]
) -> tuple[tuple[int | None, ...], tuple[str, ...]]:
    """Noise factors and measurement bases implied by a planning mode."""
    mode = mode.lower().strip()
    if mode not in PLAN_MODES:
        raise ValueError(f"unknown planning mode {mode!r}")
    if "zne" in mode:
        lams = tuple(int(l) for l in lambdas)
        if not lams or any(l < 1 for l in lams):
            raise ValueError("extrapolation needs noise factors >= 1")
        if len(set(lams)) != len(lams):
            raise ValueError("duplicate noise factors")
    else:
        lams = (None,)
    if "dsp" in mode:
        bases = ("X", "Y", "Z") if "tp" in mode else ("X", "Z")
    else:
        bases = ("direct",)
    return lams, bases


def _largest_remainder(quotas: Sequence[float], total: int) -> list[int]:
    """Integer apportionment: floors plus largest fractional remainders."""
    base = [math.floor(q) for q in quotas]
    short = total - sum(base)
    if short < 0:
        # floating-point drift pushed a quota past its share; trim greedily
        order = sorted(range(len(base)), key=lambda i: (quotas[i] - base[i], i))
        for i in order[: -short]:
            base[i] -= 1
        short = 0
    order = sorted(
        range(len(quotas)), key=lambda i: (-(quotas[i] - base[i]), i)
    )
    for i in order[:short]:
        base[i] += 1
    return base


@dataclass(frozen=True)
class ShotPlan:
    """Complete allocation of a measurement budget.

    allocations maps (term label, noise factor or None, basis tag) to a
    shot count. Basis tag "direct" means the term's own eigenbasis; "X",
    "Y", "Z" are ancilla readout bases for purification modes.
    """

    budget: int
    prelim_fraction: float
    mode: str
    lambdas: tuple[int, ...]
    bases: tuple[str, ...]
    weights: dict = field(default_factory=dict)
    preliminary: dict = field(default_factory=dict)
    allocations: dict = field(default_factory=dict)

    @property
    def preliminary_total(self) -> int:
        return sum(self.preliminary.values())

    @property
    def main_total(self) -> int:
        return sum(self.allocations.values())

    @property
    def total(self) -> int:
        return self.preliminary_total + self.main_total

    def term_total(self, label: str) -> int:
        return sum(
            c for (t, _, _), c in self.allocations.items() if t == label
        )

    def validate(self) -> None:
        if self.total != self.budget:
            raise ValueError(
                f"plan does not conserve the budget: {self.total} != {self.budget}"
            )
        for (t, lam, basis), c in self.allocations.items():
            if c < 0:
                raise ValueError(f"negative allocation for {(t, lam, basis)}")
            if self.weights.get(t, 0.0) > 0.0 and c < 1:
                raise ValueError(
                    f"term {t} has positive weight but cell {(lam, basis)} got 0"
                )

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "prelim_fraction": self.prelim_fraction,
            "mode": self.mode,
            "lambdas": list(self.lambdas),
            "bases": list(self.bases),
            "weights": dict(self.weights),
            "preliminary": dict(self.preliminary),
            "allocations": {
                f"{t}|{lam}|{basis}": c
                for (t, lam, basis), c in self.allocations.items()
            },
        }


def plan_shots(
    h: PauliSum,
    prelim: Mapping[str, float],
    budget: int,
    prelim_fraction: float = 0.001,
    mode: str = "plain",
    lambdas: Sequence[int] = (1, 2, 3, 4),
    floor_shots: int = FLOOR_SHOTS,
) -> ShotPlan:
    """Allocate a shot budget across terms, noise factors, and bases.

    Preliminary shots (fraction b of B, at least one per term) split equally.
    Main shots split proportionally to v_P = |h_P| sqrt(1 - <P>^2), then
    equally across each term's measurement cells. Terms whose preliminary
    estimate gave v_P = 0 receive ``floor_shots`` anyway, since |<P>| = 1 may
    be a sampling artifact; pass floor_shots=0 for the strict proportional
    rule.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    if not (0.0 < prelim_fraction < 1.0):
        raise ValueError("preliminary fraction must lie in (0, 1)")
    lams, bases = plan_mode_layout(mode, lambdas)
    terms = [p.label for p, _ in h.non_identity_terms()]
    if not terms:
        raise ValueError("Hamiltonian has no non-identity terms to measure")
    n_terms = len(terms)
    if budget * prelim_fraction < n_terms:
        raise ValueError(
            "budget too small: preliminary phase cannot cover every term"
        )
    prelim_total = int(round(budget * prelim_fraction))
    prelim_counts = _largest_remainder([prelim_total / n_terms] * n_terms, prelim_total)
    preliminary = dict(zip(terms, prelim_counts))

    weights: dict[str, float] = {}
    for p, c in h.non_identity_terms():
        if p.label not in prelim:
            raise ValueError(f"missing preliminary estimate for {p.label}")
        est = float(prelim[p.label])
        weights[p.label] = abs(c) * math.sqrt(max(0.0, 1.0 - min(est * est, 1.0)))

    main_budget = budget - prelim_total
    n_cells = len(lams) * len(bases)
    v_total = sum(weights.values())
    totals: dict[str, int] = {}
    if v_total <= 0.0:
        for t, c in zip(terms, _largest_remainder(
            [main_budget / n_terms] * n_terms, main_budget
        )):
            totals[t] = c
    else:
        zero = [t for t in terms if weights[t] == 0.0]
        nonzero = [t for t in terms if weights[t] > 0.0]
        floor_total = min(floor_shots * len(zero), main_budget)
        floor_each = (
            _largest_remainder([floor_total / len(zero)] * len(zero), floor_total)
            if zero
            else []
        )
        for t, c in zip(zero, floor_each):
            totals[t] = c
        remaining = main_budget - floor_total
        if remaining < len(nonzero) * n_cells:
            raise ValueError("budget too small for one shot per measurement cell")
        quotas = [remaining * weights[t] / v_total for t in nonzero]
        for t, c in zip(nonzero, _largest_remainder(quotas, remaining)):
            totals[t] = c

    allocations: dict[tuple[str, int | None, str], int] = {}
    for t in terms:
        cells = _largest_remainder([totals[t] / n_cells] * n_cells, totals[t])
        i = 0
        for lam in lams:
            for basis in bases:
                allocations[(t, lam, basis)] = cells[i]
                i += 1

    # guarantee at least one shot per cell for positively weighted terms,
    # borrowing from the largest cells so the total stays exact
    needy = [
        k for k, c in allocations.items() if c == 0 and weights[k[0]] > 0.0
    ]
    for k in needy:
        donor = max(allocations, key=lambda kk: (allocations[kk], kk[0]))
        if allocations[donor] <= 1:
            raise ValueError("budget too small for one shot per measurement cell")
        allocations[donor] -= 1
        allocations[k] = 1

    plan = ShotPlan(
        budget=budget,
        prelim_fraction=prelim_fraction,
        mode=mode.lower().strip(),
        lambdas=tuple(l for l in lams if l is not None),
        bases=bases,
        weights=weights,
        preliminary=preliminary,
        allocations=allocations,
    )
    plan.validate()
    return plan


# ---------------------------------------------------------------------------
# Bootstrap


@dataclass(frozen=True)
class BootstrapReport:
    resamples: int
    estimates: np.ndarray
    mean: float
    variance: float
    k2: float
    p_normal: float

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.variance, 0.0))

    def to_dict(self) -> dict:
        return {
            "resamples": self.resamples,
            "mean": self.mean,
            "variance": self.variance,
            "sigma": self.sigma,
            "k2": self.k2,
            "p_normal": self.p_normal,
        }


def _resample_measurement_set(
    m: MeasurementSet, rng: np.random.Generator
) -> MeasurementSet:
    if m.shots == 0:
        raise ValueError("empty measurement set")
    keys = sorted(m.counts)
    probs = np.array([m.counts[k] for k in keys], dtype=float)
    probs /= probs.sum()
    draw = rng.multinomial(m.shots, probs)
    counts = {k: int(c) for k, c in zip(keys, draw) if c}
    return MeasurementSet(m.n_qubits, counts, m.shots)


def resample_sets(data, rng: np.random.Generator):
    if isinstance(data, MeasurementSet):
        return _resample_measurement_set(data, rng)
    if isinstance(data, Mapping):
        if not data:
            raise ValueError("empty measurement collection")
        return {
            k: _resample_measurement_set(data[k], rng)
            for k in sorted(data, key=repr)
        }
    raise TypeError(f"cannot resample {type(data).__name__}")


def bootstrap(
    data,
    estimator: Callable,
    resamples: int = 1000,
    seed=0,
) -> BootstrapReport:
    """Nonparametric bootstrap of an estimator over measurement outcomes.

    Each replica redraws every measurement set multinomially (sampling
    outcomes with replacement at fixed shot count) and re-runs the
    estimator. The reported variance is the mean pairwise squared distance
    (1/R^2) sum_{r<s} (e_r - e_s)^2, which equals the population variance
    of the R estimates.
    """
    if resamples < 2:
        raise ValueError("need at least two resamples")
    rng = derive_rng(seed, "bootstrap")
    estimates = np.empty(resamples)
    for i in range(resamples):
        estimates[i] = estimator(resample_sets(data, rng))
    variance = float(np.var(estimates))
    if variance > 0.0 and resamples >= 20:
        k2, p = dagostino_pearson(estimates)
    else:
        k2, p = float("nan"), float("nan")
    return BootstrapReport(
        resamples=resamples,
        estimates=estimates,
        mean=float(estimates.mean()),
        variance=variance,
        k2=k2,
        p_normal=p,
    )


@dataclass(frozen=True)
class SigmaAgreement:
    empirical_sigma: float
    bootstrap_sigmas: tuple[float, ...]
    max_abs_diff: float


def sigma_agreement(
    experiments: Sequence,
    estimator: Callable,
    resamples: int = 500,
    seed=0,
) -> SigmaAgreement:
    """Compare scatter across repeated experiments to per-run bootstrap sigma.

    The empirical sigma is the sample standard deviation of the estimator
    over independent experiments; each experiment's bootstrap sigma should
    agree with it if the bootstrap is calibrated.
    """
    if len(experiments) < 30:
        raise ValueError("need at least 30 experiments for a stable empirical sigma")
    values = np.array([estimator(e) for e in experiments])
    empirical = float(values.std(ddof=1))
    sigmas = tuple(
        bootstrap(e, estimator, resamples=resamples, seed=(seed, "agree", i)).sigma
        for i, e in enumerate(experiments)
    )
    max_diff = max(abs(s - empirical) for s in sigmas)
    return SigmaAgreement(
        empirical_sigma=empirical,
        bootstrap_sigmas=sigmas,
        max_abs_diff=max_diff,
    )


# ---------------------------------------------------------------------------
# Normality test


def dagostino_pearson(values: Sequence[float]) -> tuple[float, float]:
    """Omnibus K^2 normality test from transformed skewness and kurtosis.

    Returns (K^2, p). K^2 = Z_skew^2 + Z_kurt^2 is asymptotically
    chi-squared with two degrees of freedom, so p = exp(-K^2 / 2).
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 20:
        raise ValueError("normality test needs at least 20 samples")
    mu = x.mean()
    d = x - mu
    m2 = float((d * d).mean())
    if m2 <= 0.0:
        raise ValueError("degenerate sample: zero variance")
    m3 = float((d**3).mean())
    m4 = float((d**4).mean())

    # skewness transform
    g1 = m3 / m2**1.5
    y = g1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = (
        3.0 * (n * n + 27 * n - 70) * (n + 1) * (n + 3)
        / ((n - 2.0) * (n + 5) * (n + 7) * (n + 9))
    )
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    if y == 0.0:
        y = 1.0
    z_skew = delta * math.log(y / alpha + math.sqrt((y / alpha) ** 2 + 1.0))

    # kurtosis transform
    b2 = m4 / (m2 * m2)
    eb2 = 3.0 * (n - 1) / (n + 1)
    var_b2 = 24.0 * n * (n - 2) * (n - 3) / ((n + 1.0) ** 2 * (n + 3) * (n + 5))
    xs = (b2 - eb2) / math.sqrt(var_b2)
    sqrt_beta1 = (
        6.0 * (n * n - 5 * n + 2) / ((n + 7) * (n + 9))
        * math.sqrt(6.0 * (n + 3) * (n + 5) / (n * (n - 2.0) * (n - 3)))
    )
    a = 6.0 + 8.0 / sqrt_beta1 * (
        2.0 / sqrt_beta1 + math.sqrt(1.0 + 4.0 / sqrt_beta1**2)
    )
    term1 = 1.0 - 2.0 / (9.0 * a)
    denom = 1.0 + xs * math.sqrt(2.0 / (a - 4.0))
    if denom == 0.0:
        z_kurt = float("nan")
    else:
        term2 = math.copysign(
            ((1.0 - 2.0 / a) / abs(denom)) ** (1.0 / 3.0), denom
        )
        z_kurt = (term1 - term2) / math.sqrt(2.0 / (9.0 * a))

    k2 = z_skew * z_skew + z_kurt * z_kurt
    return float(k2), float(math.exp(-k2 / 2.0))
