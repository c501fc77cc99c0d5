"""Shot planning, bootstrap resampling, and distributional diagnostics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from qemlab.mitigation import zne_fit
from qemlab.noisy_sim import MeasurementSet
from qemlab.pauli import PauliSum
from qemlab.stats import (
    bootstrap,
    dagostino_pearson,
    plan_mode_layout,
    plan_shots,
    resample_sets,
    sigma_agreement,
)


H2 = PauliSum.from_terms([("II", -1.0), ("ZZ", 1.0), ("XX", 0.1), ("ZI", 0.5)])
PRELIM = {"ZZ": 0.9, "XX": 0.0, "ZI": -0.5}


# ---------------------------------------------------------------------------
# Planning


def test_layout_cells():
    lams, bases = plan_mode_layout("plain", (1, 2, 3, 4))
    assert lams == (None,) and bases == ("direct",)
    lams, bases = plan_mode_layout("zne", (1, 2))
    assert lams == (1, 2) and bases == ("direct",)
    _, bases = plan_mode_layout("dsp", (1,))
    assert bases == ("X", "Z")
    _, bases = plan_mode_layout("dsp+tp", (1,))
    assert bases == ("X", "Y", "Z")
    lams, bases = plan_mode_layout("dsp+tp+zne", (1, 2, 3))
    assert lams == (1, 2, 3) and bases == ("X", "Y", "Z")
    with pytest.raises(ValueError):
        plan_mode_layout("bogus", (1,))


@pytest.mark.parametrize("mode", ["plain", "zne", "dsp", "dsp+zne", "dsp+tp", "dsp+tp+zne"])
@pytest.mark.parametrize("budget", [5000, 99_991, 10**6])
def test_plan_conserves_budget_exactly(mode, budget):
    plan = plan_shots(H2, PRELIM, budget, prelim_fraction=0.01, mode=mode)
    assert plan.total == budget
    assert plan.preliminary_total + plan.main_total == budget
    plan.validate()


@given(st.integers(min_value=3000, max_value=2_000_000), st.integers(0, 5))
@settings(max_examples=60, deadline=None)
def test_plan_budget_property(budget, mode_idx):
    mode = ("plain", "zne", "dsp", "dsp+zne", "dsp+tp", "dsp+tp+zne")[mode_idx]
    plan = plan_shots(H2, PRELIM, budget, prelim_fraction=0.01, mode=mode)
    assert plan.total == budget
    assert all(v >= 0 for v in plan.allocations.values())
    # every nonzero-weight cell got at least one shot
    for (label, lam, basis), shots in plan.allocations.items():
        if PRELIM[label] ** 2 < 1:  # nonzero variance weight
            assert shots >= 1, (label, lam, basis, shots)


def test_plan_allocates_by_weighted_uncertainty():
    """Shots scale with |h| sqrt(1 - <P>^2): the XX term (tiny coefficient)
    must receive fewer shots than ZZ."""
    plan = plan_shots(H2, PRELIM, 100_000, prelim_fraction=0.001, mode="plain")
    t = {label: plan.term_total(label) for label in PRELIM}
    v = {
        "ZZ": 1.0 * np.sqrt(1 - 0.81),
        "XX": 0.1 * 1.0,
        "ZI": 0.5 * np.sqrt(1 - 0.25),
    }
    assert t["ZZ"] > t["ZI"] > t["XX"]
    main = plan.main_total
    for label in ("ZZ", "ZI"):
        expected = v[label] / sum(v.values()) * main
        assert t[label] == pytest.approx(expected, rel=0.02)


def test_plan_floor_rescues_saturated_terms():
    prelim = {"ZZ": 1.0, "XX": 0.0, "ZI": -0.5}  # ZZ weight exactly zero
    plan = plan_shots(H2, prelim, 10_000, prelim_fraction=0.01, mode="plain")
    assert plan.term_total("ZZ") >= 100  # default floor
    no_floor = plan_shots(
        H2, prelim, 10_000, prelim_fraction=0.01, mode="plain", floor_shots=0
    )
    assert no_floor.term_total("ZZ") == 0
    assert no_floor.total == 10_000


def test_plan_equal_split_prelim():
    plan = plan_shots(H2, PRELIM, 9_000, prelim_fraction=0.01, mode="plain")
    pre = [plan.preliminary[label] for label in PRELIM]
    assert sum(pre) == 90
    assert max(pre) - min(pre) <= 1


def test_plan_missing_term_and_tiny_budget_errors():
    with pytest.raises(ValueError):
        plan_shots(H2, {"ZZ": 0.5}, 10_000, mode="plain")
    with pytest.raises(ValueError):
        plan_shots(H2, PRELIM, 10, prelim_fraction=0.1, mode="dsp+tp+zne")


def test_plan_serializes():
    plan = plan_shots(H2, PRELIM, 10_000, prelim_fraction=0.01, mode="dsp")
    doc = plan.to_dict()
    assert doc["budget"] == 10_000
    assert all("|" in k for k in doc["allocations"])


# ---------------------------------------------------------------------------
# Bootstrap


def _binomial_set(p0: float, shots: int, seed: int) -> MeasurementSet:
    rng = np.random.default_rng(seed)
    n0 = int(rng.binomial(shots, p0))
    return MeasurementSet(1, {"0": n0, "1": shots - n0}, shots)


def _z_of(m: MeasurementSet) -> float:
    return (m.counts.get("0", 0) - m.counts.get("1", 0)) / m.shots


def test_bootstrap_variance_equals_pairwise_formula():
    """The reported variance is the O(R^2) all-pairs half-squared-difference
    mean, computed here literally."""
    m = _binomial_set(0.7, 400, seed=1)
    rep = bootstrap(m, _z_of, resamples=64, seed=9)
    e = np.asarray(rep.estimates)
    r = len(e)
    pairwise = sum(
        (e[i] - e[j]) ** 2 for i in range(r) for j in range(i + 1, r)
    ) / (r * r)
    assert rep.variance == pytest.approx(pairwise, rel=1e-12)
    assert rep.variance == pytest.approx(np.var(e), rel=1e-12)


def test_bootstrap_deterministic_and_seed_sensitive():
    m = _binomial_set(0.6, 500, seed=2)
    a = bootstrap(m, _z_of, resamples=50, seed=3)
    b = bootstrap(m, _z_of, resamples=50, seed=3)
    c = bootstrap(m, _z_of, resamples=50, seed=4)
    assert np.array_equal(a.estimates, b.estimates)
    assert not np.array_equal(a.estimates, c.estimates)


def test_bootstrap_matches_analytic_binomial_sigma():
    shots, p0 = 10_000, 0.75
    m = MeasurementSet(1, {"0": int(p0 * shots), "1": shots - int(p0 * shots)}, shots)
    rep = bootstrap(m, _z_of, resamples=2000, seed=0)
    analytic = np.sqrt(4 * p0 * (1 - p0) / shots)
    assert rep.sigma == pytest.approx(analytic, rel=0.1)
    assert rep.p_normal > 0.01


def test_bootstrap_identical_outcomes_zero_variance():
    m = MeasurementSet(1, {"0": 100}, 100)
    rep = bootstrap(m, _z_of, resamples=30, seed=0)
    assert rep.variance == 0.0
    assert np.isnan(rep.p_normal)


def test_bootstrap_requires_two_resamples():
    m = _binomial_set(0.5, 100, seed=0)
    with pytest.raises(ValueError):
        bootstrap(m, _z_of, resamples=1, seed=0)


def test_resample_sets_handles_mappings():
    data = {
        "a": _binomial_set(0.5, 200, seed=5),
        "b": _binomial_set(0.9, 300, seed=6),
    }
    rng = np.random.default_rng(0)
    out = resample_sets(data, rng)
    assert set(out) == {"a", "b"}
    assert out["a"].shots == 200 and out["b"].shots == 300
    assert sum(out["a"].counts.values()) == 200


# ---------------------------------------------------------------------------
# Normality diagnostic, cross-checked against the reference implementation


@pytest.mark.parametrize(
    "draw",
    [
        lambda rng: rng.normal(size=150),
        lambda rng: rng.exponential(size=80),
        lambda rng: rng.normal(size=21),
        lambda rng: rng.standard_t(3, size=60),
    ],
)
def test_dagostino_matches_scipy(draw):
    rng = np.random.default_rng(12)
    x = draw(rng)
    k2, p = dagostino_pearson(x)
    ref_k2, ref_p = sps.normaltest(x)
    assert k2 == pytest.approx(float(ref_k2), rel=1e-12)
    assert p == pytest.approx(float(ref_p), rel=1e-12)


def test_dagostino_guards():
    with pytest.raises(ValueError):
        dagostino_pearson(np.arange(10.0))  # too short
    with pytest.raises(ValueError):
        dagostino_pearson(np.ones(25))  # zero variance


def test_sigma_agreement_on_binomial_replicas():
    shots = 4000
    experiments = [_binomial_set(0.65, shots, seed=i) for i in range(40)]
    rep = sigma_agreement(experiments, _z_of, resamples=300, seed=1)
    analytic = np.sqrt(4 * 0.65 * 0.35 / shots)
    assert rep.empirical_sigma == pytest.approx(analytic, rel=0.35)
    assert rep.max_abs_diff < 3e-3
    with pytest.raises(ValueError):
        sigma_agreement(experiments[:10], _z_of)


# ---------------------------------------------------------------------------
# Regression cross-check against statsmodels


def test_fit_coefficients_match_statsmodels():
    import statsmodels.api as sm

    rng = np.random.default_rng(3)
    lams = np.array([1, 2, 3, 4, 5])
    var = np.array([0.1, 0.4, 0.9, 1.6, 2.5])
    y = 2.0 - 0.3 * lams + rng.normal(0, np.sqrt(var))
    points = list(zip(lams.tolist(), y.tolist(), var.tolist()))

    x = sm.add_constant(lams.astype(float))
    ref_w = sm.WLS(y, x, weights=1.0 / var).fit()
    fit_w = zne_fit(points, method="WLS")
    assert fit_w.intercept == pytest.approx(ref_w.params[0], rel=1e-10)
    assert fit_w.slope == pytest.approx(ref_w.params[1], rel=1e-10)

    ref_o = sm.OLS(y, x).fit()
    fit_o = zne_fit(points, method="OLS")
    assert fit_o.intercept == pytest.approx(ref_o.params[0], rel=1e-10)
    assert fit_o.slope == pytest.approx(ref_o.params[1], rel=1e-10)
    assert fit_o.stderr == pytest.approx(ref_o.bse[0], rel=1e-10)
    assert fit_o.r_squared == pytest.approx(ref_o.rsquared, rel=1e-10)


def test_wls_beats_ols_under_heteroskedasticity():
    """Gauss-Markov, checked numerically: with known unequal variances the
    weighted estimator's sampling spread is smaller."""
    rng = np.random.default_rng(8)
    lams = np.array([1, 2, 3, 4])
    var = np.array([0.01, 0.25, 1.0, 4.0])
    w_err, o_err = [], []
    for _ in range(400):
        y = 1.0 + 0.5 * lams + rng.normal(0, np.sqrt(var))
        points = list(zip(lams.tolist(), y.tolist(), var.tolist()))
        w_err.append(zne_fit(points, method="WLS").intercept - 1.0)
        o_err.append(zne_fit(points, method="OLS").intercept - 1.0)
    assert np.std(w_err) < np.std(o_err)
    fit_w = zne_fit(points, method="WLS")
    fit_o = zne_fit(points, method="OLS")
    assert fit_w.stderr <= fit_o.stderr * 2  # stderr scales comparably
