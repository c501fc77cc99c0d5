"""Estimators and strategy composition rules."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qemlab import hcl
from qemlab.circuits import build_ansatz
from qemlab.mitigation import (
    AssignmentMatrix,
    EstimationError,
    QuasiDistribution,
    Strategy,
    StrategyError,
    SymmetryConstraint,
    all_strategies,
    ancilla_tomogram,
    dsp_estimate,
    dsp_estimate_x_only,
    dsp_estimate_z_only,
    energy_estimate,
    mem_apply,
    mem_build,
    metrics,
    preliminary_estimates,
    raw_estimate,
    simulate_calibration,
    sv_filter,
    tomography_purify,
    zne_fit,
)
from qemlab.noisy_sim import MeasurementSet, NoiseModel, derive_rng
from qemlab.pauli import PauliString, PauliSum


# ---------------------------------------------------------------------------
# Strategy algebra


def test_strategy_parse_and_canonical_order():
    s = Strategy.parse("zne+sv+mem")
    assert s.name == "MEM+SV+ZNE"
    assert Strategy.parse("MEM+SV") == Strategy.parse("sv+mem")
    assert Strategy.parse("RAW").name == "RAW"
    assert Strategy.parse("").techniques == ()


@pytest.mark.parametrize(
    "bad",
    ["SV+DSP", "TP", "MEM+TP", "ZNE+TP", "SV+TP", "MEM+SV+DSP", "XX", "MEM+MEM"],
)
def test_strategy_rejects_invalid(bad):
    with pytest.raises(StrategyError):
        Strategy.parse(bad)


def test_sixteen_valid_strategies():
    names = [s.name for s in all_strategies()]
    assert len(names) == 16
    assert len(set(names)) == 16
    assert "RAW" in names
    assert "MEM+DSP+TP+ZNE" in names
    for n in names:
        assert Strategy.parse(n).name == n  # idempotent canonical form


def test_plan_modes():
    assert Strategy.parse("RAW").plan_mode() == "plain"
    assert Strategy.parse("MEM+SV").plan_mode() == "plain"
    assert Strategy.parse("ZNE").plan_mode() == "zne"
    assert Strategy.parse("DSP").plan_mode() == "dsp"
    assert Strategy.parse("DSP+TP").plan_mode() == "dsp+tp"
    assert Strategy.parse("MEM+DSP+TP+ZNE").plan_mode() == "dsp+tp+zne"


# ---------------------------------------------------------------------------
# Readout mitigation


def test_assignment_matrix_inverse_is_exact():
    a = AssignmentMatrix(flip_probs=(0.14, 0.05))
    for k in range(2):
        assert np.allclose(a.inverse(k) @ a.matrix(k), np.eye(2), atol=1e-12)


def test_assignment_matrix_singular():
    a = AssignmentMatrix(flip_probs=(0.5,))
    with pytest.raises(EstimationError):
        a.inverse(0)


def test_mem_recovers_analytic_product_noise():
    """Apply the assignment map analytically, invert it, compare to 1e-10."""
    rng = np.random.default_rng(0)
    n = 3
    ideal = rng.random(2**n)
    ideal /= ideal.sum()
    flips = (0.02, 0.14, 0.08)
    a = AssignmentMatrix(flip_probs=flips)
    noisy = a.dense() @ ideal
    shots = 10**9  # exact expected counts, scaled
    counts = {
        format(i, f"0{n}b"): int(round(p * shots)) for i, p in enumerate(noisy)
    }
    m = MeasurementSet(n, counts, sum(counts.values()))
    q = mem_apply(a, m)
    recovered = np.array([q.prob(format(i, f"0{n}b")) for i in range(2**n)])
    assert np.max(np.abs(recovered - ideal)) < 1e-10 + 2 / shots


def test_mem_preserves_negative_quasi_probabilities():
    a = AssignmentMatrix(flip_probs=(0.2,))
    m = MeasurementSet(1, {"0": 99, "1": 1}, 100)
    q = mem_apply(a, m)
    assert q.prob("1") < 0  # overcorrection below zero must survive
    assert q.mass == pytest.approx(1.0)


def test_mem_build_from_calibration_runs():
    noise = NoiseModel(readout_flip=(0.1, 0.02))
    a = mem_build(simulate_calibration(2, noise, shots=200_000, seed=3), 2)
    assert a.flip_probs[0] == pytest.approx(0.1, abs=0.01)
    assert a.flip_probs[1] == pytest.approx(0.02, abs=0.005)


def test_quasi_distribution_lazy_beyond_dense_limit():
    n = 16
    a = AssignmentMatrix(flip_probs=tuple(0.01 for _ in range(n)))
    m = MeasurementSet(n, {"0" * n: 80, "1" * n: 20}, 100)
    q = mem_apply(a, m)
    assert q.dense is None  # factored form, no 2^16 vector
    assert q.prob("0" * n) > 0.8
    assert abs(q.mass - 1.0) < 1e-9


# ---------------------------------------------------------------------------
# Symmetry verification


def test_allowed_set_matches_brute_force(hamiltonian):
    sc = SymmetryConstraint.build(
        [(op, sorted(allowed)) for op, allowed in hcl.symmetry_operators()],
        hamiltonian=hamiltonian,
    )
    assert sc.allowed_set(3) == frozenset({"001", "011", "101", "110", "111"})


def test_constraint_rejects_non_diagonal(hamiltonian):
    bad = PauliSum.from_terms([("XII", 1.0)])
    with pytest.raises(ValueError):
        SymmetryConstraint.build([(bad, (1.0,))])


def test_sv_filter_counts():
    sc = SymmetryConstraint.build(
        [(op, sorted(allowed)) for op, allowed in hcl.symmetry_operators()]
    )
    m = MeasurementSet(3, {"000": 40, "001": 30, "011": 20, "100": 10}, 100)
    f = sv_filter(m, sc)
    assert set(f.counts) == {"001", "011"}
    assert f.shots == 50
    # idempotent
    assert sv_filter(f, sc) == f


def test_sv_filter_empty_errors():
    sc = SymmetryConstraint.build(
        [(op, sorted(allowed)) for op, allowed in hcl.symmetry_operators()]
    )
    m = MeasurementSet(3, {"000": 5}, 5)
    with pytest.raises(EstimationError):
        sv_filter(m, sc)


def test_sv_filter_quasi_renormalizes():
    sc = SymmetryConstraint.build(
        [(op, sorted(allowed)) for op, allowed in hcl.symmetry_operators()]
    )
    a = AssignmentMatrix(flip_probs=tuple(0.05 for _ in range(3)))
    m = MeasurementSet(3, {"001": 70, "011": 20, "000": 10}, 100)
    q = mem_apply(a, m)
    fq = sv_filter(q, sc)
    assert fq.filtered
    assert abs(fq.mass - 1.0) < 1e-9  # renormalized
    assert fq.retained_fraction < 1.0
    disallowed = [0, 2, 4]  # 000, 010, 100
    assert all(abs(fq.dense[i]) < 1e-15 for i in disallowed)


# ---------------------------------------------------------------------------
# Raw estimation


def test_raw_estimate_value_and_variance():
    m = MeasurementSet(2, {"00": 75, "11": 25}, 100)
    v, var = raw_estimate(m, PauliString("ZZ"))
    assert v == pytest.approx(1.0)
    assert var == pytest.approx(0.0)
    m2 = MeasurementSet(2, {"00": 50, "01": 50}, 100)
    v2, var2 = raw_estimate(m2, PauliString("ZZ"))
    assert v2 == pytest.approx(0.0)
    assert var2 == pytest.approx(1.0 / 100)


def test_energy_estimate_requires_every_term():
    h = PauliSum.from_terms([("II", -1.0), ("ZZ", 0.5), ("XX", 0.25)])
    per_term = {"ZZ": (0.8, 0.001)}
    with pytest.raises(ValueError):
        energy_estimate(per_term, h)
    per_term["XX"] = (0.1, 0.002)
    e, var = energy_estimate(per_term, h)
    assert e == pytest.approx(-1.0 + 0.5 * 0.8 + 0.25 * 0.1)
    assert var == pytest.approx(0.25 * 0.001 + 0.0625 * 0.002)


# ---------------------------------------------------------------------------
# Dual-state purification algebra


def _ancilla_sets(p_val: float, shots: int = 10**8):
    """Exact post-selected ancilla statistics for a given <P>."""
    sel = (1 + p_val**2) / 2
    ez = 2 * p_val / (1 + p_val**2)
    ex = (1 - p_val**2) / (1 + p_val**2)
    n_kept = sel * shots

    def counts(e):
        w0 = (1 + e) / 2 * n_kept
        w1 = (1 - e) / 2 * n_kept
        lost = shots - n_kept
        return MeasurementSet(
            2,
            {
                "00": int(round(w0)),
                "01": int(round(w1)),
                "10": int(round(lost)),
            },
            int(round(w0)) + int(round(w1)) + int(round(lost)),
        )

    return counts(ex), counts(ez)


@pytest.mark.parametrize("p_val", [-0.95, -0.3, 0.0, 0.23, 0.6, 0.997])
def test_dsp_round_trip(p_val):
    m_x, m_z = _ancilla_sets(p_val)
    est = dsp_estimate(m_x, m_z)
    assert est.mode == "xz"
    assert est.value == pytest.approx(p_val, abs=1e-3)
    assert est.retention == pytest.approx((1 + p_val**2) / 2, abs=1e-6)


@pytest.mark.parametrize("p_val", [-0.8, 0.4, 0.99])
def test_dsp_z_only_round_trip(p_val):
    _, m_z = _ancilla_sets(p_val)
    est = dsp_estimate_z_only(m_z)
    assert est.mode == "z_only"
    assert est.value == pytest.approx(p_val, abs=1e-3)


@pytest.mark.parametrize("p_val", [-0.8, 0.4])
def test_dsp_x_only_magnitude(p_val):
    m_x, _ = _ancilla_sets(p_val)
    est = dsp_estimate_x_only(m_x)
    assert est.mode == "x_only"
    assert not est.sign_known
    assert est.value == pytest.approx(abs(p_val), abs=1e-3)


def test_dsp_divergence_guard_falls_back_to_z():
    """E^X forced to -1: the ratio form diverges, Z-only must take over."""
    m_x = MeasurementSet(2, {"01": 100}, 100)  # ancilla all ones -> ex = -1
    m_z = MeasurementSet(2, {"00": 90, "01": 10}, 100)
    est = dsp_estimate(m_x, m_z)
    assert est.mode == "z_only"
    assert math.isfinite(est.value)


def test_dsp_postselect_everything_gone():
    m = MeasurementSet(2, {"10": 5, "11": 5}, 10)
    with pytest.raises(EstimationError):
        dsp_estimate(m, m)


# ---------------------------------------------------------------------------
# Tomography purification


def test_tomogram_clips_and_validates():
    m_x, m_z = _ancilla_sets(0.6, shots=10**6)
    t = ancilla_tomogram(m_x, m_x, m_z)
    assert -1.0 <= t.gamma_x <= 1.0
    from qemlab.mitigation import AncillaTomogram

    with pytest.raises(ValueError):
        AncillaTomogram(1.5, 0.0, 0.0, retention=1.0, eff_shots=10)


def test_purify_worked_example():
    """gamma = (-0.9, 0, 0.1): dominant eigenvector has decisively negative
    X, so the minority one is kept, giving -0.110/1.994."""
    from qemlab.mitigation import AncillaTomogram

    t = AncillaTomogram(-0.9, 0.0, 0.1, retention=0.8, eff_shots=10**6)
    est = tomography_purify(t)
    assert est.purified
    assert est.value == pytest.approx(-0.05539, abs=1e-4)


@given(
    st.floats(min_value=-0.99, max_value=0.99),
    st.floats(min_value=-0.99, max_value=0.99),
    st.floats(min_value=0.1, max_value=1.0),
)
@settings(max_examples=120, deadline=None)
def test_purify_scale_invariance(gx, gz, c):
    """Purification depends only on the Bloch direction, not its length."""
    from qemlab.mitigation import AncillaTomogram

    norm = math.hypot(gx, gz)
    if norm < 1e-3 or abs(gz) < 0.06:
        return
    t1 = AncillaTomogram(gx, 0.0, gz, retention=0.7, eff_shots=10**4)
    t2 = AncillaTomogram(c * gx, 0.0, c * gz, retention=0.7, eff_shots=10**4)
    e1, e2 = tomography_purify(t1), tomography_purify(t2)
    if e1.purified and e2.purified:
        assert e1.value == pytest.approx(e2.value, abs=1e-9)


def test_purify_gates_on_small_z():
    from qemlab.mitigation import AncillaTomogram

    t = AncillaTomogram(0.5, 0.0, 0.01, retention=0.9, eff_shots=10**4)
    est = tomography_purify(t)
    assert not est.purified
    assert est.value == pytest.approx(0.01 / 1.5, abs=1e-9)


def test_purify_fully_mixed_returns_unpurified():
    from qemlab.mitigation import AncillaTomogram

    t = AncillaTomogram(0.0, 0.0, 0.0, retention=0.9, eff_shots=100)
    est = tomography_purify(t)
    assert not est.purified
    assert est.value == 0.0


def test_purify_dead_zone_does_not_flip_on_noise():
    """A slightly negative X component (sampling noise around zero on a
    near-deterministic term) must not negate the estimate."""
    from qemlab.mitigation import AncillaTomogram

    t = AncillaTomogram(-0.02, 0.0, -0.99, retention=0.99, eff_shots=10**4)
    est = tomography_purify(t)
    assert est.purified
    assert est.value < -0.9  # sign preserved


# ---------------------------------------------------------------------------
# Extrapolation fitting


def test_zne_fit_exact_affine_both_methods():
    points = [(lam, 2.0 + 3.0 * lam, 0.5) for lam in (1, 2, 3, 4)]
    for method in ("WLS", "OLS"):
        fit = zne_fit(points, method=method)
        assert fit.intercept == pytest.approx(2.0, abs=1e-12)
        assert fit.slope == pytest.approx(3.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_zne_fit_equal_weights_matches_ols():
    rng = np.random.default_rng(5)
    points = [(lam, 1.0 - 0.2 * lam + rng.normal(0, 0.05), 0.3) for lam in (1, 2, 3, 4)]
    w = zne_fit(points, method="WLS")
    o = zne_fit(points, method="OLS")
    assert w.intercept == pytest.approx(o.intercept, abs=1e-12)
    assert w.slope == pytest.approx(o.slope, abs=1e-12)


def test_zne_fit_validation():
    with pytest.raises(ValueError):
        zne_fit([(1, 0.0, 1.0)])  # one point
    with pytest.raises(ValueError):
        zne_fit([(1, 0.0, 1.0), (1, 0.1, 1.0)])  # duplicate lambda
    with pytest.raises(ValueError):
        zne_fit([(0, 0.0, 1.0), (1, 0.1, 1.0)])  # lambda below one
    with pytest.raises(ValueError):
        zne_fit([(1, 0.0, -1.0), (2, 0.1, 1.0)])  # negative variance


# ---------------------------------------------------------------------------
# Metrics and preliminary shrinkage


def test_metrics_suppression():
    m = metrics(-455.10, truth=-455.156, raw_bias=0.112)
    assert m.bias == pytest.approx(0.056, abs=5e-4)
    assert m.suppression_pct == pytest.approx(50.0, abs=1.0)
    none_raw = metrics(-455.10, truth=-455.156)
    assert none_raw.suppression_pct is None


def test_preliminary_estimates_never_saturate(hamiltonian, optimal_angles):
    """Tiny samples shrink toward zero instead of reporting exactly +/-1."""
    alloc = {p.label: 1 for p, _ in hamiltonian.non_identity_terms()}
    est = preliminary_estimates(
        hamiltonian, optimal_angles, NoiseModel.noiseless(), alloc, seed=0
    )
    assert all(abs(v) <= 1 / 3 + 1e-12 for v in est.values())
    alloc50 = {p.label: 50 for p, _ in hamiltonian.non_identity_terms()}
    est50 = preliminary_estimates(
        hamiltonian, optimal_angles, NoiseModel.noiseless(), alloc50, seed=0
    )
    assert est50["IZZ"] < -0.8  # strong signal survives shrinkage
