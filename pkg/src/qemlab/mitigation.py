"""Error-mitigated estimators and their lawful compositions.

Techniques: readout-error inversion (MEM), symmetry verification (SV),
dual-state purification (DSP), ancilla tomography purification (TP), and
zero-noise extrapolation (ZNE), plus the unmitigated RAW baseline. A
``Strategy`` is an ordered subset validated against the pairwise
compatibility matrix; application order is always MEM, SV, DSP, TP, ZNE.

Estimators are pure functions of measurement data, so the same pipeline can
be replayed on bootstrap-resampled sets. ``run_strategy`` executes the
simulator to collect the per-term sets demanded by a ``ShotPlan`` and then
delegates to ``estimate_from_sets``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .circuits import (
    Circuit,
    CouplingMap,
    amplify_noise,
    build_ansatz,
    build_dsp_circuit,
    decompose_swaps,
)
from .noisy_sim import (
    MeasurementSet,
    NoiseModel,
    derive_rng,
    evolve_density,
    run_density,
    sample_from_density,
)
from .pauli import PauliString, PauliSum, commutes_with_sum
from .stats import ShotPlan

__all__ = [
    "TECHNIQUES",
    "Strategy",
    "StrategyError",
    "EstimationError",
    "AssignmentMatrix",
    "QuasiDistribution",
    "SymmetryConstraint",
    "AncillaTomogram",
    "DspEstimate",
    "TpEstimate",
    "ZneFit",
    "ZneSeries",
    "EstimatorResult",
    "Metrics",
    "mem_build",
    "mem_apply",
    "simulate_calibration",
    "sv_filter",
    "raw_estimate",
    "energy_estimate",
    "dsp_estimate",
    "dsp_estimate_z_only",
    "dsp_estimate_x_only",
    "ancilla_tomogram",
    "tomography_purify",
    "zne_fit",
    "all_strategies",
    "run_strategy",
    "estimate_from_sets",
    "collect_sets",
    "preliminary_estimates",
    "metrics",
]

TECHNIQUES = ("MEM", "SV", "DSP", "TP", "ZNE")

# Pairwise compatibility; pairs not listed are incompatible. TP is special:
# it rides along with DSP, so any TP pair is waived when DSP is present
# (TP without DSP is rejected outright).
_COMPATIBLE = frozenset(
    frozenset(p)
    for p in [
        ("MEM", "SV"),
        ("MEM", "ZNE"),
        ("MEM", "DSP"),
        ("SV", "ZNE"),
        ("ZNE", "DSP"),
        ("DSP", "TP"),
    ]
)

_CANONICAL_ORDER = {t: i for i, t in enumerate(TECHNIQUES)}

MEM_DENSE_LIMIT = 14
EPS_DIVERGENCE = 1e-6
TP_GATE_THRESHOLD = 0.05


class StrategyError(ValueError):
    """Invalid technique combination or strategy configuration."""


class EstimationError(RuntimeError):
    """A term-level estimator failed (empty post-selection, singular MEM...)."""


@dataclass(frozen=True)
class Strategy:
    """Validated, canonically ordered set of mitigation techniques."""

    techniques: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "techniques", tuple(self.techniques))
        seen = set()
        for t in self.techniques:
            if t not in TECHNIQUES:
                raise StrategyError(f"unknown technique {t!r}")
            if t in seen:
                raise StrategyError(f"duplicate technique {t}")
            seen.add(t)
        if "TP" in seen and "DSP" not in seen:
            raise StrategyError("TP requires DSP (it purifies the DSP ancilla)")
        ts = sorted(seen, key=_CANONICAL_ORDER.__getitem__)
        for i, a in enumerate(ts):
            for b in ts[i + 1 :]:
                pair = frozenset((a, b))
                if pair == frozenset(("DSP", "TP")):
                    continue
                if "TP" in pair and "DSP" in seen:
                    continue  # TP is fused with DSP; DSP's own pairs govern
                if pair not in _COMPATIBLE:
                    raise StrategyError(f"incompatible techniques: {a} + {b}")
        object.__setattr__(self, "techniques", tuple(ts))

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        text = text.strip()
        if not text or text.upper() == "RAW":
            return cls(())
        parts = [p.strip().upper() for p in text.split("+") if p.strip()]
        return cls(tuple(parts))

    @property
    def name(self) -> str:
        return "+".join(self.techniques) if self.techniques else "RAW"

    def __contains__(self, t: str) -> bool:
        return t in self.techniques

    def __str__(self) -> str:
        return self.name

    def plan_mode(self) -> str:
        mode = []
        if "DSP" in self:
            mode.append("dsp")
            if "TP" in self:
                mode.append("tp")
        if "ZNE" in self:
            mode.append("zne")
        return "+".join(mode) if mode else "plain"


def all_strategies() -> tuple[Strategy, ...]:
    """Every valid strategy (including RAW): 16 in total."""
    out = []
    for mask in range(32):
        subset = tuple(t for i, t in enumerate(TECHNIQUES) if mask >> i & 1)
        try:
            out.append(Strategy(subset))
        except StrategyError:
            continue
    uniq = {s.name: s for s in out}
    return tuple(sorted(uniq.values(), key=lambda s: (len(s.techniques), s.name)))


# ---------------------------------------------------------------------------
# Measurement-error mitigation


@dataclass(frozen=True)
class AssignmentMatrix:
    """Per-qubit readout transition probabilities.

    Qubit k's bit flips with probability p_k symmetrically, so the 2x2
    transition matrix is [[1-p, p], [p, 1-p]] and the full matrix is the
    Kronecker product over qubits.
    """

    flip_probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "flip_probs", tuple(float(p) for p in self.flip_probs)
        )
        for p in self.flip_probs:
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"flip probability {p} outside [0, 1]")

    @property
    def n_qubits(self) -> int:
        return len(self.flip_probs)

    def matrix(self, k: int) -> np.ndarray:
        p = self.flip_probs[k]
        return np.array([[1 - p, p], [p, 1 - p]])

    def inverse(self, k: int) -> np.ndarray:
        p = self.flip_probs[k]
        if abs(1 - 2 * p) < 1e-12:
            raise EstimationError(
                f"assignment matrix for qubit {k} is singular (p = {p})"
            )
        return np.array([[1 - p, -p], [-p, 1 - p]]) / (1 - 2 * p)

    def dense(self) -> np.ndarray:
        if self.n_qubits > MEM_DENSE_LIMIT:
            raise ValueError("dense assignment matrix too large")
        m = self.matrix(0)
        for k in range(1, self.n_qubits):
            m = np.kron(m, self.matrix(k))
        return m


def mem_build(
    calibration: Mapping[tuple[int, int], MeasurementSet], n_qubits: int
) -> AssignmentMatrix:
    """Estimate flip probabilities from 2N prepare-and-measure runs.

    ``calibration[(k, prep)]`` holds single-qubit outcomes for qubit k
    prepared in |prep>. p_k averages the flip frequency over both
    preparations.
    """
    if not calibration:
        raise ValueError("empty calibration data")
    probs = []
    for k in range(n_qubits):
        try:
            m0 = calibration[(k, 0)]
            m1 = calibration[(k, 1)]
        except KeyError as e:
            raise ValueError(f"missing calibration run {e} for qubit {k}") from e
        if m0.shots == 0 or m1.shots == 0:
            raise ValueError(f"empty calibration set for qubit {k}")
        f0 = m0.counts.get("1", 0) / m0.shots
        f1 = m1.counts.get("0", 0) / m1.shots
        probs.append(0.5 * (f0 + f1))
    return AssignmentMatrix(tuple(probs))


def simulate_calibration(
    n_qubits: int, noise: NoiseModel, shots: int, seed
) -> dict[tuple[int, int], MeasurementSet]:
    """Run the 2N single-qubit calibration circuits on the simulator.

    Each circuit prepares |0> or |1> on one qubit and reads only that qubit.
    Calibration shots are accounted separately from the estimation budget.
    """
    from .circuits import Gate
    from .noisy_sim import run_trajectories

    out: dict[tuple[int, int], MeasurementSet] = {}
    for k in range(n_qubits):
        for prep in (0, 1):
            gates = (Gate("X", (k,)),) if prep else ()
            c = Circuit(n_qubits, gates, measured_qubits=(k,))
            rng = derive_rng(seed, "calibration", k, prep)
            out[(k, prep)] = run_trajectories(c, noise, shots, rng)
    return out


@dataclass
class QuasiDistribution:
    """Readout-inverted distribution; weights may be mildly negative.

    Small registers carry a dense weight vector (bit 0 of the bitstring is
    the most significant index bit). Large registers keep the factored form
    (empirical distribution plus per-qubit inverses) and answer pointwise
    ``prob`` queries lazily.
    """

    n_qubits: int
    shots: int
    dense: np.ndarray | None = None
    base: dict[str, float] | None = None
    inverses: tuple[np.ndarray, ...] | None = None
    retained_fraction: float = 1.0
    filtered: bool = False

    @property
    def mass(self) -> float:
        if self.dense is not None:
            return float(self.dense.sum())
        return float(sum(self.base.values()))

    def prob(self, bits: str) -> float:
        if len(bits) != self.n_qubits:
            raise ValueError("bitstring length mismatch")
        if self.dense is not None:
            return float(self.dense[int(bits, 2)])
        # lazy product form: sum_j f_j prod_k inv[k][b_k, j_k]
        total = 0.0
        target = np.array([int(ch) for ch in bits])
        for key, f in self.base.items():
            src = np.fromiter((int(ch) for ch in key), dtype=int, count=self.n_qubits)
            w = 1.0
            for k in range(self.n_qubits):
                w *= self.inverses[k][target[k], src[k]]
            total += f * w
        return total

    def weights(self) -> dict[str, float]:
        if self.dense is None:
            raise ValueError("weights() requires the dense representation")
        n = self.n_qubits
        return {
            format(i, f"0{n}b"): float(w)
            for i, w in enumerate(self.dense)
            if w != 0.0
        }


def mem_apply(a: AssignmentMatrix, m: MeasurementSet) -> QuasiDistribution:
    """Invert readout errors on an empirical distribution.

    Applies the tensored per-qubit inverses; negative quasi-probabilities
    are preserved (clipping would bias expectation values). Bit position i
    of the outcome strings must correspond to flip_probs[i].
    """
    if a.n_qubits != m.n_qubits:
        raise ValueError(
            f"assignment matrix covers {a.n_qubits} qubits, set has {m.n_qubits}"
        )
    n = m.n_qubits
    inverses = tuple(a.inverse(k) for k in range(n))
    dist = m.distribution()
    if n <= MEM_DENSE_LIMIT:
        v = np.zeros(2**n)
        for bits, f in dist.items():
            v[int(bits, 2)] = f
        w = v.reshape((2,) * n)
        for k in range(n):
            w = np.tensordot(inverses[k], w, axes=([1], [k]))
            w = np.moveaxis(w, 0, k)
        return QuasiDistribution(
            n_qubits=n,
            shots=m.shots,
            dense=w.reshape(-1),
            base=dist,
            inverses=inverses,
        )
    return QuasiDistribution(
        n_qubits=n, shots=m.shots, base=dist, inverses=inverses
    )


# ---------------------------------------------------------------------------
# Symmetry verification


@dataclass(frozen=True)
class SymmetryConstraint:
    """Diagonal symmetry operators with their admissible eigenvalues."""

    operators: tuple[tuple[PauliSum, tuple[float, ...]], ...]

    @classmethod
    def build(
        cls,
        operators: Sequence[tuple[PauliSum, Sequence[float]]],
        hamiltonian: PauliSum | None = None,
        tol: float = 1e-9,
    ) -> "SymmetryConstraint":
        ops = []
        for op, allowed in operators:
            if not op.is_diagonal:
                raise ValueError("symmetry operators must be diagonal")
            if hamiltonian is not None and not commutes_with_sum(
                op, hamiltonian, tol=tol
            ):
                raise ValueError(
                    "symmetry operator does not commute with the Hamiltonian"
                )
            ops.append((op, tuple(float(a) for a in allowed)))
        return cls(tuple(ops))

    def is_allowed(self, bits: str) -> bool:
        for op, allowed in self.operators:
            v = op.diag_value(bits)
            if not any(abs(v - a) < 1e-9 for a in allowed):
                return False
        return True

    def allowed_set(self, n_qubits: int) -> frozenset[str]:
        return frozenset(
            b
            for i in range(2**n_qubits)
            if self.is_allowed(b := format(i, f"0{n_qubits}b"))
        )


def sv_filter(
    sample: MeasurementSet | QuasiDistribution, constraint: SymmetryConstraint
):
    """Discard outcomes violating the symmetry constraints.

    MeasurementSet in, MeasurementSet out (shots = retained count). After
    MEM the input is a quasi-distribution: the same mask is applied to the
    quasi-weights and the result renormalized by the retained quasi-mass.
    """
    if isinstance(sample, MeasurementSet):
        kept = {
            b: c for b, c in sample.counts.items() if constraint.is_allowed(b)
        }
        retained = sum(kept.values())
        if retained == 0:
            raise EstimationError("symmetry filter discarded every outcome")
        return MeasurementSet(sample.n_qubits, kept, retained)
    q = sample
    if q.dense is None:
        raise ValueError("symmetry filtering needs the dense quasi-distribution")
    n = q.n_qubits
    mask = np.zeros(2**n)
    for i in range(2**n):
        if constraint.is_allowed(format(i, f"0{n}b")):
            mask[i] = 1.0
    kept = q.dense * mask
    retained_mass = float(kept.sum())
    if abs(retained_mass) < 1e-9:
        raise EstimationError("symmetry filter removed all quasi-probability mass")
    return QuasiDistribution(
        n_qubits=n,
        shots=q.shots,
        dense=kept / retained_mass,
        base=q.base,
        inverses=q.inverses,
        retained_fraction=q.retained_fraction * abs(retained_mass),
        filtered=True,
    )


# ---------------------------------------------------------------------------
# Raw estimation


def _sign_vector(p: PauliString) -> np.ndarray:
    n = p.n_qubits
    s = np.ones(1)
    for ch in p.label:
        s = np.kron(s, np.array([1.0, -1.0]) if ch != "I" else np.ones(2))
    return s


def raw_estimate(
    sample: MeasurementSet | QuasiDistribution,
    p: PauliString,
    basis: str | None = None,
) -> tuple[float, float]:
    """Mean +/-1 eigenvalue of p over measured strings, with its variance.

    The sample must have been collected in a basis that diagonalises p; when
    the basis string is provided it is checked against p's support.
    """
    if basis is not None:
        if len(basis) != p.n_qubits:
            raise ValueError("basis length mismatch")
        for q in p.support:
            if basis[q] != p.label[q]:
                raise ValueError(
                    f"measurement basis {basis} incompatible with {p.label}"
                )
    if isinstance(sample, MeasurementSet):
        if sample.n_qubits != p.n_qubits:
            raise ValueError("qubit count mismatch")
        if sample.shots == 0:
            raise ValueError("empty measurement set")
        value = sum(
            f * p.sign_on(b) for b, f in sample.distribution().items()
        )
        var = max(0.0, 1.0 - value * value) / sample.shots
        return float(value), float(var)

    q = sample
    if q.n_qubits != p.n_qubits:
        raise ValueError("qubit count mismatch")
    s = _sign_vector(p)
    if q.dense is None:
        raise ValueError("raw_estimate on a lazy quasi-distribution")
    value = float(q.dense @ s)
    eff = max(1.0, q.shots * q.retained_fraction)
    if q.filtered or q.inverses is None:
        var = max(0.0, 1.0 - min(value * value, 1.0)) / eff
        var = max(var, 1e-12)
    else:
        # exact multinomial delta method through the linear inversion:
        # estimate = sum_j f_j g_j with g = (A^-1)^T s
        g = s.reshape((2,) * q.n_qubits)
        for k in range(q.n_qubits):
            g = np.tensordot(q.inverses[k].T, g, axes=([1], [k]))
            g = np.moveaxis(g, 0, k)
        g = g.reshape(-1)
        second = 0.0
        for bits, f in q.base.items():
            second += f * g[int(bits, 2)] ** 2
        var = max(0.0, second - value * value) / q.shots
    return value, float(var)


def energy_estimate(
    per_term: Mapping[str, tuple[float, float]], h: PauliSum
) -> tuple[float, float]:
    """Combine per-term expectations: E = h_I + sum h_i <P_i>.

    Cross-term covariances are zero because every term is estimated from an
    independent measurement set.
    """
    e = h.identity_coeff
    var = 0.0
    for p, c in h.non_identity_terms():
        if p.label not in per_term:
            raise ValueError(f"missing estimate for term {p.label}")
        v, s2 = per_term[p.label]
        e += c * v
        var += c * c * s2
    return float(e), float(var)


# ---------------------------------------------------------------------------
# Dual-state purification


@dataclass(frozen=True)
class DspEstimate:
    value: float
    variance: float
    retention: float
    ez: float
    ex: float | None
    mode: str  # "xz", "z_only", or "x_only"
    sign_known: bool = True


@dataclass(frozen=True)
class AncillaTomogram:
    """Bloch components of the post-selected ancilla state."""

    gamma_x: float
    gamma_y: float
    gamma_z: float
    retention: float
    eff_shots: float

    def __post_init__(self) -> None:
        for g in (self.gamma_x, self.gamma_y, self.gamma_z):
            if abs(g) > 1.0 + 0.2:
                raise ValueError(f"Bloch component {g} far outside [-1, 1]")


@dataclass(frozen=True)
class TpEstimate:
    value: float
    variance: float
    retention: float
    purified: bool
    gamma: tuple[float, float, float]


def _ancilla_moments(
    sample: MeasurementSet | QuasiDistribution,
) -> tuple[float, float, float]:
    """Post-select the system register on all zeros.

    Returns (ancilla expectation, retention, effective retained shots). The
    ancilla is the last bit of each outcome string.
    """
    if isinstance(sample, MeasurementSet):
        n = sample.n_qubits - 1
        zeros = "0" * n
        w0 = sample.counts.get(zeros + "0", 0)
        w1 = sample.counts.get(zeros + "1", 0)
        kept = w0 + w1
        if kept == 0:
            raise EstimationError("post-selection removed every outcome")
        if sample.shots == 0:
            raise ValueError("empty measurement set")
        return (w0 - w1) / kept, kept / sample.shots, float(kept)
    q = sample
    if q.dense is None:
        raise ValueError("post-selection needs the dense quasi-distribution")
    w0 = float(q.dense[0])  # system all-zeros, ancilla 0
    w1 = float(q.dense[1])  # system all-zeros, ancilla 1
    kept = w0 + w1
    total = q.mass
    if abs(kept) < 1e-12:
        raise EstimationError("post-selection removed all quasi-probability mass")
    retention = kept / total if total != 0 else 0.0
    eff = max(1.0, q.shots * abs(retention))
    return (w0 - w1) / kept, retention, eff


def dsp_estimate(
    m_x: MeasurementSet | QuasiDistribution,
    m_z: MeasurementSet | QuasiDistribution,
    eps_div: float = EPS_DIVERGENCE,
) -> DspEstimate:
    """Purified <P> from X- and Z-basis ancilla measurements.

    E^Z = 2<P>/(1+<P>^2) and E^X = (1-<P>^2)/(1+<P>^2) on the post-selected
    ancilla, so E^Z/(1+E^X) recovers <P> while cancelling the leading noise
    contamination. If 1+E^X is numerically zero the ratio diverges and the
    Z-only reconstruction is used instead.
    """
    ez, ret_z, eff_z = _ancilla_moments(m_z)
    ex, ret_x, eff_x = _ancilla_moments(m_x)
    denom = 1.0 + ex
    if denom < eps_div:
        z_only = dsp_estimate_z_only(m_z)
        return DspEstimate(
            value=z_only.value,
            variance=z_only.variance,
            retention=0.5 * (ret_z + ret_x),
            ez=ez,
            ex=ex,
            mode="z_only",
        )
    value = ez / denom
    var_ez = max(0.0, 1.0 - ez * ez) / eff_z
    var_ex = max(0.0, 1.0 - ex * ex) / eff_x
    var = var_ez / denom**2 + (ez * ez) * var_ex / denom**4
    return DspEstimate(
        value=value,
        variance=max(var, 1e-14),
        retention=0.5 * (ret_z + ret_x),
        ez=ez,
        ex=ex,
        mode="xz",
    )


def dsp_estimate_z_only(
    m_z: MeasurementSet | QuasiDistribution,
) -> DspEstimate:
    """Invert E^Z = 2<P>/(1+<P>^2) from Z data alone.

    The branch with |<P>| <= 1 is <Z>/(1 + sqrt(1 - <Z>^2)).
    """
    ez, ret, eff = _ancilla_moments(m_z)
    z = min(1.0, max(-1.0, ez))
    root = math.sqrt(max(0.0, 1.0 - z * z))
    value = z / (1.0 + root)
    # derivative of the inversion, for the delta-method variance
    if root > 1e-9:
        dgdz = (1.0 + root + z * z / root) / (1.0 + root) ** 2
    else:
        dgdz = 1.0
    var = dgdz * dgdz * max(0.0, 1.0 - z * z) / eff
    return DspEstimate(
        value=value,
        variance=max(var, 1e-14),
        retention=ret,
        ez=ez,
        ex=None,
        mode="z_only",
    )


def dsp_estimate_x_only(
    m_x: MeasurementSet | QuasiDistribution,
) -> DspEstimate:
    """Magnitude of <P> from X data; the sign is not recoverable."""
    ex, ret, eff = _ancilla_moments(m_x)
    x = min(1.0, max(-1.0 + 1e-12, ex))
    value = math.sqrt((1.0 - x) / (1.0 + x))
    var = max(0.0, 1.0 - x * x) / eff  # crude scale; sign loss dominates use
    return DspEstimate(
        value=value,
        variance=max(var, 1e-14),
        retention=ret,
        ez=0.0,
        ex=ex,
        mode="x_only",
        sign_known=False,
    )


def ancilla_tomogram(
    m_x: MeasurementSet | QuasiDistribution,
    m_y: MeasurementSet | QuasiDistribution,
    m_z: MeasurementSet | QuasiDistribution,
) -> AncillaTomogram:
    gx, rx, ex = _ancilla_moments(m_x)
    gy, ry, ey = _ancilla_moments(m_y)
    gz, rz, ez = _ancilla_moments(m_z)
    clip = lambda g: min(1.0, max(-1.0, g))
    return AncillaTomogram(
        gamma_x=clip(gx),
        gamma_y=clip(gy),
        gamma_z=clip(gz),
        retention=(rx + ry + rz) / 3.0,
        eff_shots=(ex + ey + ez) / 3.0,
    )


def tomography_purify(
    t: AncillaTomogram,
    raw_z_threshold: float = TP_GATE_THRESHOLD,
    x_flip_threshold: float = TP_GATE_THRESHOLD,
) -> TpEstimate:
    """Project the ancilla tomogram onto its dominant pure state.

    The eigenvectors of rho = (I + gamma . sigma)/2 have Bloch vectors
    +/- gamma/|gamma|; purification keeps the largest-weight one and
    recomputes E^Z/(1+E^X) from it. The ideal ancilla satisfies E^X >= 0,
    so a decisively negative X-component signals that noise inverted the
    eigenvalue order and the minority eigenvector is selected instead. The
    override deliberately has a dead zone: when E^X is near zero (a
    near-deterministic term) the X-component of either eigenvector is pure
    sampling noise, and flipping on its sign would randomly negate the
    estimate. Purification is skipped entirely, returning the unpurified
    estimate, when |E^Z| sits below the gating threshold (a near-zero
    signal is amplified unreliably) or when the tomogram is fully mixed.
    """
    gamma = (t.gamma_x, t.gamma_y, t.gamma_z)
    norm = math.sqrt(sum(g * g for g in gamma))

    def unpurified() -> TpEstimate:
        denom = 1.0 + t.gamma_x
        if denom < EPS_DIVERGENCE:
            z = min(1.0, max(-1.0, t.gamma_z))
            root = math.sqrt(max(0.0, 1.0 - z * z))
            value = z / (1.0 + root)
        else:
            value = t.gamma_z / denom
        var = _tp_variance(t.gamma_x, t.gamma_z, t.eff_shots)
        return TpEstimate(
            value=value,
            variance=var,
            retention=t.retention,
            purified=False,
            gamma=gamma,
        )

    if abs(t.gamma_z) < raw_z_threshold or norm < 1e-12:
        return unpurified()
    ux, _, uz = (g / norm for g in gamma)
    if ux < -x_flip_threshold:
        ux, uz = -ux, -uz
    value = uz / (1.0 + ux)
    var = _tp_variance(ux, uz, t.eff_shots)
    return TpEstimate(
        value=value,
        variance=var,
        retention=t.retention,
        purified=True,
        gamma=gamma,
    )


def _tp_variance(ex: float, ez: float, eff_shots: float) -> float:
    denom = max(EPS_DIVERGENCE, 1.0 + ex)
    var_ez = max(0.0, 1.0 - ez * ez) / max(1.0, eff_shots)
    var_ex = max(0.0, 1.0 - ex * ex) / max(1.0, eff_shots)
    return max(var_ez / denom**2 + ez * ez * var_ex / denom**4, 1e-14)


# ---------------------------------------------------------------------------
# Zero-noise extrapolation


@dataclass(frozen=True)
class ZneFit:
    intercept: float
    slope: float
    r_squared: float
    stderr: float
    method: str


@dataclass(frozen=True)
class ZneSeries:
    points: tuple[tuple[int, float, float], ...]  # (lambda, estimate, variance)
    fit: ZneFit | None = None


def zne_fit(
    points: Sequence[tuple[int, float, float]], method: str = "WLS"
) -> ZneFit:
    """Linear extrapolation of E(lambda) to lambda = 0.

    WLS weights each point by 1/variance (treated as known variances, so the
    intercept standard error is sqrt([(X^T W X)^-1]_00) without residual
    rescaling); OLS ignores the variances and uses the classical residual
    estimate. With exactly affine inputs both give the same intercept.
    """
    method = method.upper()
    if method not in ("WLS", "OLS"):
        raise ValueError(f"unknown fit method {method!r}")
    if len(points) < 2:
        raise ValueError("need at least two noise factors")
    lams = [p[0] for p in points]
    if len(set(lams)) < 2:
        raise ValueError("degenerate design: noise factors must be distinct")
    if any(l < 1 or int(l) != l for l in lams):
        raise ValueError("noise factors must be integers >= 1")
    x = np.array([float(p[0]) for p in points])
    y = np.array([p[1] for p in points])
    if method == "WLS":
        v = np.array([p[2] for p in points])
        if np.any(v <= 0) or not np.all(np.isfinite(v)):
            raise ValueError("WLS needs finite positive variances")
        w = 1.0 / v
    else:
        w = np.ones_like(x)
    sw = w.sum()
    sx = (w * x).sum()
    sxx = (w * x * x).sum()
    sy = (w * y).sum()
    sxy = (w * x * y).sum()
    delta = sw * sxx - sx * sx
    if abs(delta) < 1e-300:
        raise ValueError("degenerate design matrix")
    slope = (sw * sxy - sx * sy) / delta
    intercept = (sxx * sy - sx * sxy) / delta
    resid = y - (intercept + slope * x)
    ss_res = float((w * resid * resid).sum())
    ybar = sy / sw
    ss_tot = float((w * (y - ybar) ** 2).sum())
    r2 = 1.0 if ss_tot < 1e-300 else 1.0 - ss_res / ss_tot
    if method == "WLS":
        stderr = math.sqrt(sxx / delta)
    else:
        dof = len(points) - 2
        s2 = ss_res / dof if dof > 0 else float("nan")
        stderr = math.sqrt(s2 * sxx / delta) if dof > 0 else float("nan")
    return ZneFit(
        intercept=float(intercept),
        slope=float(slope),
        r_squared=float(r2),
        stderr=float(stderr),
        method=method,
    )


# ---------------------------------------------------------------------------
# Strategy orchestration


@dataclass
class EstimatorResult:
    """Energy estimate with full per-term diagnostics."""

    strategy: str
    energy: float
    variance: float
    per_lambda: tuple[tuple[int | None, float, float], ...]
    fit: ZneFit | None
    per_term: dict
    retention: float | None
    consumed_shots: int
    sets: dict | None = field(default=None, repr=False)

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.variance, 0.0))

    def to_json(self) -> str:
        doc = {
            "strategy": self.strategy,
            "energy": self.energy,
            "variance": self.variance,
            "sigma": self.sigma,
            "per_lambda": [
                {"lambda": l, "energy": e, "variance": v}
                for (l, e, v) in self.per_lambda
            ],
            "fit": None
            if self.fit is None
            else {
                "intercept": self.fit.intercept,
                "slope": self.fit.slope,
                "r_squared": self.fit.r_squared,
                "stderr": self.fit.stderr,
                "method": self.fit.method,
            },
            "retention": self.retention,
            "consumed_shots": self.consumed_shots,
            "per_term": self.per_term,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


@dataclass(frozen=True)
class Metrics:
    bias: float
    variance: float
    mse: float
    suppression_pct: float | None

    @classmethod
    def compute(
        cls, energy: float, variance: float, truth: float, raw_bias: float | None
    ) -> "Metrics":
        bias = energy - truth
        mse = variance + bias * bias
        supp = None
        if raw_bias is not None and raw_bias != 0.0:
            supp = (1.0 - abs(bias / raw_bias)) * 100.0
        return cls(bias=bias, variance=variance, mse=mse, suppression_pct=supp)


def metrics(
    result: EstimatorResult | float,
    truth: float,
    raw_bias: float | None = None,
    variance: float | None = None,
) -> Metrics:
    if isinstance(result, EstimatorResult):
        return Metrics.compute(result.energy, result.variance, truth, raw_bias)
    return Metrics.compute(float(result), variance or 0.0, truth, raw_bias)


def _dsp_bases(s: Strategy) -> tuple[str, ...]:
    return ("X", "Y", "Z") if "TP" in s else ("X", "Z")


def collect_sets(
    s: Strategy,
    h: PauliSum,
    params: Sequence[float],
    noise: NoiseModel,
    plan: ShotPlan,
    seed,
    coupling: CouplingMap | None = None,
    native: bool = False,
) -> dict[tuple[str, int | None, str], MeasurementSet]:
    """Execute the measurement layout demanded by the plan.

    Returns sets keyed by (term label, lambda, basis tag). Density-matrix
    evolutions are cached per distinct circuit, so plain-mode terms that
    share the ansatz circuit only evolve it once per lambda.
    """
    if plan.mode != s.plan_mode():
        raise StrategyError(
            f"plan mode {plan.mode!r} does not match strategy {s.name}"
        )
    u = build_ansatz(params, native=native)
    n = h.n_qubits
    lambdas = plan.lambdas if "ZNE" in s else (None,)
    dsp = "DSP" in s
    bases = _dsp_bases(s) if dsp else ("direct",)
    sets: dict[tuple[str, int | None, str], MeasurementSet] = {}
    rho_cache: dict = {}
    for lam in lambdas:
        for p, _ in h.non_identity_terms():
            if dsp:
                cache_key = (lam, p.label)
                base_circ = build_dsp_circuit(u, p, coupling)
            else:
                cache_key = (lam, "plain")
                base_circ = u
            if cache_key not in rho_cache:
                circ = base_circ
                if lam is not None:
                    circ = amplify_noise(decompose_swaps(circ), lam)
                rho_cache[cache_key] = evolve_density(circ, noise)
            rho = rho_cache[cache_key]
            for tag in bases:
                shots = plan.allocations.get((p.label, lam, tag), 0)
                if shots == 0:
                    continue
                basis = p.label if tag == "direct" else "Z" * n + tag
                rng = derive_rng(seed, "main", p.label, tag, lam)
                sets[(p.label, lam, tag)] = sample_from_density(
                    rho,
                    noise,
                    shots,
                    rng,
                    basis=basis,
                    measured_qubits=tuple(range(rho.n_qubits)),
                )
    return sets


def estimate_from_sets(
    s: Strategy,
    h: PauliSum,
    plan: ShotPlan,
    sets: Mapping[tuple[str, int | None, str], MeasurementSet],
    assignment: AssignmentMatrix | None = None,
    constraint: SymmetryConstraint | None = None,
    tp_threshold: float = TP_GATE_THRESHOLD,
    zne_method: str = "WLS",
) -> EstimatorResult:
    """Run the estimator chain MEM -> SV -> DSP(+TP) -> ZNE on given sets.

    Pure in its inputs; bootstrap replays call this on resampled sets.
    """
    if "MEM" in s and assignment is None:
        raise StrategyError("MEM requested but no assignment matrix supplied")
    if "SV" in s and constraint is None:
        raise StrategyError("SV requested but no symmetry constraint supplied")
    lambdas = plan.lambdas if "ZNE" in s else (None,)
    dsp = "DSP" in s
    bases = _dsp_bases(s) if dsp else ("direct",)
    per_lambda = []
    per_term_diag: dict = {}
    retentions: list[float] = []
    for lam in lambdas:
        per_term: dict[str, tuple[float, float]] = {}
        for p, coeff in h.non_identity_terms():
            key_of = lambda tag: (p.label, lam, tag)
            try:
                samples: dict[str, MeasurementSet | QuasiDistribution] = {}
                for tag in bases:
                    m = sets.get(key_of(tag))
                    if m is None:
                        raise EstimationError(f"missing measurement set {key_of(tag)}")
                    samples[tag] = mem_apply(assignment, m) if "MEM" in s else m
                if dsp:
                    if "TP" in s:
                        t = ancilla_tomogram(
                            samples["X"], samples["Y"], samples["Z"]
                        )
                        tp = tomography_purify(t, raw_z_threshold=tp_threshold)
                        value, var = tp.value, tp.variance
                        diag = {
                            "mode": "tp" if tp.purified else "tp_unpurified",
                            "retention": tp.retention,
                            "gamma": list(tp.gamma),
                        }
                        retentions.append(tp.retention)
                    else:
                        d = dsp_estimate(samples["X"], samples["Z"])
                        value, var = d.value, d.variance
                        diag = {
                            "mode": f"dsp_{d.mode}",
                            "retention": d.retention,
                            "ez": d.ez,
                            "ex": d.ex,
                        }
                        retentions.append(d.retention)
                else:
                    sample = samples["direct"]
                    diag = {"mode": "direct"}
                    if "SV" in s and p.is_diagonal:
                        before = (
                            sample.shots
                            if isinstance(sample, MeasurementSet)
                            else None
                        )
                        sample = sv_filter(sample, constraint)
                        if isinstance(sample, MeasurementSet):
                            diag["retention"] = sample.shots / before
                        else:
                            diag["retention"] = sample.retained_fraction
                        diag["mode"] = "sv"
                        retentions.append(diag["retention"])
                    value, var = raw_estimate(sample, p)
                per_term[p.label] = (value, var)
                diag.update({"value": value, "variance": var})
                per_term_diag[f"{p.label}|lam={lam}"] = diag
            except EstimationError as e:
                raise EstimationError(
                    f"strategy {s.name}, term {p.label}, lambda {lam}: {e}"
                ) from e
        e_lam, v_lam = energy_estimate(per_term, h)
        per_lambda.append((lam, e_lam, v_lam))
    if "ZNE" in s:
        fit = zne_fit(
            [(l, e, v) for (l, e, v) in per_lambda], method=zne_method
        )
        energy = fit.intercept
        variance = fit.stderr**2 if math.isfinite(fit.stderr) else per_lambda[0][2]
    else:
        fit = None
        _, energy, variance = per_lambda[0]
    consumed = plan.preliminary_total + sum(
        m.shots for m in sets.values()
    )
    return EstimatorResult(
        strategy=s.name,
        energy=energy,
        variance=variance,
        per_lambda=tuple(per_lambda),
        fit=fit,
        per_term=per_term_diag,
        retention=float(np.mean(retentions)) if retentions else None,
        consumed_shots=consumed,
        sets=dict(sets),
    )


def run_strategy(
    s: Strategy,
    h: PauliSum,
    params: Sequence[float],
    noise: NoiseModel,
    plan: ShotPlan,
    seed,
    assignment: AssignmentMatrix | None = None,
    constraint: SymmetryConstraint | None = None,
    coupling: CouplingMap | None = None,
    tp_threshold: float = TP_GATE_THRESHOLD,
    zne_method: str = "WLS",
    native: bool = False,
) -> EstimatorResult:
    """Collect measurements per the plan and estimate the energy."""
    sets = collect_sets(
        s, h, params, noise, plan, seed, coupling=coupling, native=native
    )
    return estimate_from_sets(
        s,
        h,
        plan,
        sets,
        assignment=assignment,
        constraint=constraint,
        tp_threshold=tp_threshold,
        zne_method=zne_method,
    )


def preliminary_estimates(
    h: PauliSum,
    params: Sequence[float],
    noise: NoiseModel,
    prelim_alloc: Mapping[str, int],
    seed,
    native: bool = False,
) -> dict[str, float]:
    """Cheap raw estimate of every term, used only to weight the shot plan.

    Estimates are shrunk by m/(m+2) (Laplace's rule of succession applied to
    both outcomes): a saturated small sample must not report exactly +/-1,
    which would zero the term's variance weight and starve a possibly
    dominant term of main-phase shots.
    """
    u = build_ansatz(params, native=native)
    rho = evolve_density(u, noise)
    out: dict[str, float] = {}
    for p, _ in h.non_identity_terms():
        shots = prelim_alloc[p.label]
        rng = derive_rng(seed, "prelim", p.label)
        m = sample_from_density(
            rho, noise, shots, rng, basis=p.label,
            measured_qubits=tuple(range(h.n_qubits)),
        )
        value, _ = raw_estimate(m, p)
        out[p.label] = value * shots / (shots + 2)
    return out
