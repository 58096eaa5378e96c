import math
import warnings

import numpy as np
import pytest

from pareto_acq.ehvi import (
    CounterexampleSearch,
    SearchBudgetExhausted,
    VarianceCounterexample,
    ehvi_cone,
    ehvi_exact,
    ehvi_mc_oracle,
    ehvi_weighted,
    find_tehvi_variance_counterexample,
    phvi_transform,
    tehvi,
    tehvi_mc_oracle,
)
from pareto_acq.gaussian_kernels import TruncationMassError
from pareto_acq.pareto_geometry import DesirabilityMap, SimplicialCone, hvi


def random_instance(rng, n_max=10):
    n = int(rng.integers(0, n_max + 1))
    A = rng.uniform(0, 1, (n, 2))
    mu = rng.uniform(-0.2, 1.1, 2)
    sd = rng.uniform(0.05, 0.6, 2)
    return mu, sd, A, np.ones(2)


# --- PHVI transform -----------------------------------------------------------


def test_phvi_degenerate_limits():
    # normalized mean 1 and normalized point 0.5 with r = 0 after v -> r - v
    inst = phvi_transform([0.0, 0.0], [0.0, 0.0], [[0.5, 0.5]], [1.0, 1.0])
    assert np.allclose(inst.transformed_reference, 1.0)
    assert np.allclose(inst.transformed_set, 0.5)


def test_phvi_empty_set_is_product():
    inst = phvi_transform([0.3, 0.6], [0.4, 0.2], np.zeros((0, 2)), [1, 1])
    assert inst.transformed_set.shape == (0, 2)
    assert inst.value() == pytest.approx(np.prod(inst.transformed_reference))


def test_phvi_transform_box_invariant():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        mu, sd, A, r = random_instance(rng)
        inst = phvi_transform(mu, sd, A, r)
        assert np.all(inst.transformed_set >= 0)
        assert np.all(inst.transformed_set <= inst.transformed_reference)


# --- exact EHVI -----------------------------------------------------------------


def test_ehvi_standard_normal_product():
    assert ehvi_exact([0.0, 0.0], [1.0, 1.0], np.zeros((0, 2)), [0.0, 0.0]) == pytest.approx(
        1 / (2 * math.pi), abs=1e-12
    )


def test_ehvi_zero_when_set_dominates_reference_region():
    assert ehvi_exact([0.5, 0.5], [0.3, 0.3], [[-50.0, -50.0]], [1, 1]) == 0.0


def test_fig2_value_against_oracle(three_points):
    A, r = three_points
    v = ehvi_exact([2.0, 1.5], [0.7, 0.6], A, r)
    assert v == pytest.approx(1.797243085527, abs=1e-9)
    est, se = ehvi_mc_oracle([2.0, 1.5], [0.7, 0.6], A, r, 10**6, seed=0)
    assert abs(est - v) < 3 * se


def test_batch_matches_single():
    rng = np.random.default_rng(1)
    A = rng.uniform(0, 1, (5, 2))
    mu = rng.uniform(0, 1, (20, 2))
    sd = rng.uniform(0.05, 0.5, (20, 2))
    batch = ehvi_exact(mu, sd, A, [1, 1])
    assert np.allclose(batch, [ehvi_exact(m, s, A, [1, 1]) for m, s in zip(mu, sd)], atol=1e-14)


def test_batch_equals_generic_path():
    # the vectorized 2-D sweep against the generic transformed-HVI route
    rng = np.random.default_rng(2)
    for _ in range(100):
        mu, sd, A, r = random_instance(rng)
        assert ehvi_exact(mu, sd, A, r) == pytest.approx(phvi_transform(mu, sd, A, r).value(), abs=1e-12)


def test_random_instances_match_mc():
    rng = np.random.default_rng(3)
    for k in range(5):
        mu, sd, A, r = random_instance(rng)
        est, se = ehvi_mc_oracle(mu, sd, A, r, 10**6, seed=k)
        assert abs(ehvi_exact(mu, sd, A, r) - est) < 3 * se + 1e-12


def test_three_objectives_match_mc():
    rng = np.random.default_rng(4)
    A = rng.uniform(0, 1, (4, 3))
    mu, sd = rng.uniform(0.2, 0.8, 3), rng.uniform(0.1, 0.4, 3)
    est, se = ehvi_mc_oracle(mu, sd, A, np.ones(3), 10**6, seed=1)
    assert abs(ehvi_exact(mu, sd, A, np.ones(3)) - est) < 3 * se


def test_point_mass_oracle_is_exact_hvi(three_points):
    A, r = three_points
    est, se = ehvi_mc_oracle([2.45, 1.05], [0.0, 0.0], A, r, 1000)
    assert est == pytest.approx(hvi((2.45, 1.05), A, r)) and se == 0.0


def test_oracle_reproducible_and_se_scaling(three_points):
    A, r = three_points
    a = ehvi_mc_oracle([2.0, 1.5], [0.7, 0.6], A, r, 10**5, seed=5)
    assert a == ehvi_mc_oracle([2.0, 1.5], [0.7, 0.6], A, r, 10**5, seed=5)
    b = ehvi_mc_oracle([2.0, 1.5], [0.7, 0.6], A, r, 2 * 10**5, seed=5)
    assert a[1] / b[1] == pytest.approx(math.sqrt(2), rel=0.05)
    c = ehvi_mc_oracle([2.0, 1.5], [0.7, 0.6], A, r, 10**5, seed=6)
    assert abs(a[0] - c[0]) < 3 * math.hypot(a[1], c[1])


def test_oracle_rejects_tiny_budgets():
    with pytest.raises(ValueError):
        ehvi_mc_oracle([0, 0], [1, 1], np.zeros((0, 2)), [1, 1], 10)


def test_mean_and_variance_monotonicity_grid():
    rng = np.random.default_rng(6)
    for _ in range(300):
        mu, sd, A, r = random_instance(rng)
        base = ehvi_exact(mu, sd, A, r)
        j = rng.integers(2)
        better, wider = mu.copy(), sd.copy()
        better[j] -= rng.uniform(0, 0.5)
        wider[j] += rng.uniform(0, 0.5)
        assert ehvi_exact(better, sd, A, r) >= base - 1e-10
        assert ehvi_exact(mu, wider, A, r) >= base - 1e-10


# --- weighted ------------------------------------------------------------------------


def test_weighted_identity_equals_canonical(three_points):
    A, r = three_points
    d = DesirabilityMap.identity([-10, -10], [10, 10])
    assert ehvi_weighted([2, 1.5], [0.7, 0.6], A, r, d) == pytest.approx(ehvi_exact([2, 1.5], [0.7, 0.6], A, r))


def test_weighted_degenerate_prediction():
    d = DesirabilityMap.ramp([0.2, 0.1], [0.9, 0.8], [0, 0], [1, 1], outer_slope=0.2)
    A = np.array([[0.4, 0.6], [0.7, 0.3]])
    y_t = d.transform([0.5, 0.4])
    expected = hvi(y_t, d.transform(A), d.transform([1, 1]))
    assert ehvi_weighted(y_t, [0, 0], A, [1, 1], d) == pytest.approx(expected, abs=1e-14)


def test_weighted_matches_mc_in_transformed_coordinates():
    rng = np.random.default_rng(7)
    d = DesirabilityMap.ramp([0.1, 0.3], [0.7, 0.9], [0, 0], [1, 1], outer_slope=0.3)
    A = rng.uniform(0, 1, (4, 2))
    mu_t, sd_t = rng.uniform(0, 0.8, 2), rng.uniform(0.05, 0.3, 2)
    est, se = ehvi_mc_oracle(mu_t, sd_t, d.transform(A), d.transform([1, 1]), 10**6, seed=2)
    assert abs(ehvi_weighted(mu_t, sd_t, A, [1, 1], d) - est) < 3 * se


def test_weighted_warns_on_inadmissible_kernel():
    d = DesirabilityMap.ramp([0.2, 0.2], [0.8, 0.8], [0, 0], [1, 1])
    with pytest.warns(UserWarning):
        ehvi_weighted([0.5, 0.5], [0.1, 0.1], [[0.6, 0.6]], [1, 1], d)


# --- cone ------------------------------------------------------------------------------


def test_cone_identity_equals_exact():
    rng = np.random.default_rng(8)
    I = SimplicialCone.from_generators(np.eye(2))
    for _ in range(20):
        mu, sd, A, r = random_instance(rng)
        res = ehvi_cone(mu, sd, A, r, I)
        assert res.path == "exact"
        assert abs(res.value - ehvi_exact(mu, sd, A, r)) <= 1e-12


def test_cone_axis_scaling():
    cone = SimplicialCone.from_generators(np.diag([2.0, 1.0]))
    A = np.array([[0.4, 0.5]])
    res = ehvi_cone([0.6, 0.3], [0.2, 0.1], A, [1, 1], cone)
    scaled = ehvi_exact([0.3, 0.3], [0.1, 0.1], [[0.2, 0.5]], [0.5, 1.0])
    assert res.path == "exact" and res.value == pytest.approx(2 * scaled, abs=1e-14)


def test_shear_cone_uses_mc_and_degenerate_limit():
    cone = SimplicialCone.from_generators([[1.0, 0.4], [0.0, 1.0]])
    A = np.array([[0.3, 0.6], [0.7, 0.2]])
    y = np.array([0.4, 0.3])
    res = ehvi_cone(y, [1e-9, 1e-9], A, [1, 1], cone, n_samples=10**4)
    assert res.path == "monte_carlo"
    expected = cone.abs_determinant * hvi(cone.to_cone_coordinates(y), cone.to_cone_coordinates(A),
                                          cone.to_cone_coordinates([1, 1]))
    assert abs(res.value - expected) < 1e-6


# --- truncated -----------------------------------------------------------------------------


def test_tehvi_wide_box_equals_ehvi():
    rng = np.random.default_rng(9)
    for _ in range(20):
        mu, sd, A, r = random_instance(rng)
        assert abs(tehvi(mu, sd, A, r, [-1e6, -1e6], [1e6, 1e6]) - ehvi_exact(mu, sd, A, r)) < 1e-8


def test_tehvi_roi_inside_dominated_region():
    A = np.array([[0.1, 0.1]])
    assert tehvi([0.3, 0.3], [0.2, 0.2], A, [1, 1], [0.2, 0.2], [0.9, 0.9]) == 0.0


def test_tehvi_matches_truncated_sampling():
    rng = np.random.default_rng(10)
    A = rng.uniform(0, 1, (4, 2))
    mu, sd = [0.4, 0.5], [0.3, 0.4]
    lo, hi = [0.0, 0.1], [0.8, 0.9]
    est, se = tehvi_mc_oracle(mu, sd, A, [1, 1], lo, hi, 10**6, seed=3)
    assert abs(tehvi(mu, sd, A, [1, 1], lo, hi) - est) < 3 * se


def test_tehvi_mass_underflow():
    with pytest.raises(TruncationMassError):
        tehvi([0, 0], [0.01, 0.01], [[0.5, 0.5]], [1, 1], [5, 5], [6, 6])


def test_tehvi_mean_monotone_with_fixed_roi():
    rng = np.random.default_rng(11)
    for _ in range(200):
        mu, sd, A, r = random_instance(rng)
        lo = rng.uniform(-0.5, 0.3, 2)
        hi = lo + rng.uniform(0.3, 1.5, 2)
        try:
            base = tehvi(mu, sd, A, r, lo, hi)
            better = mu.copy()
            better[rng.integers(2)] -= rng.uniform(0, 0.3)
            assert tehvi(better, sd, A, r, lo, hi) >= base - 1e-10
        except TruncationMassError:
            continue


# --- counterexample search --------------------------------------------------------------------


def test_stored_counterexample_reproduces():
    from importlib import resources

    text = resources.files("pareto_acq").joinpath("data", "tehvi_variance_counterexample.json").read_text()
    cx = VarianceCounterexample.from_json(text)
    lo = tehvi(cx.mu, cx.sigma, cx.A, cx.r, *cx.roi)
    hi = tehvi(cx.mu, cx.sigma_prime, cx.A, cx.r, *cx.roi)
    assert np.all(np.asarray(cx.sigma_prime) >= np.asarray(cx.sigma))
    assert hi < lo - 1e-9
    assert lo == pytest.approx(cx.tehvi_lo, abs=1e-14) and hi == pytest.approx(cx.tehvi_hi, abs=1e-14)


def test_counterexample_confirmed_by_truncated_mc():
    cx = find_tehvi_variance_counterexample(CounterexampleSearch(seed=0))
    a, sa = tehvi_mc_oracle(cx.mu, cx.sigma, cx.A, cx.r, *cx.roi, n_samples=10**6, seed=1)
    b, sb = tehvi_mc_oracle(cx.mu, cx.sigma_prime, cx.A, cx.r, *cx.roi, n_samples=10**6, seed=2)
    assert abs(a - cx.tehvi_lo) < 3 * sa and abs(b - cx.tehvi_hi) < 3 * sb


def test_counterexample_in_embedded_slice():
    cx = find_tehvi_variance_counterexample(CounterexampleSearch(seed=1, embedded_slice=True, n_trials=10**4))
    assert cx.sigma[1] == 0.0 and cx.tehvi_hi < cx.tehvi_lo


def test_canonical_ehvi_negative_control():
    with pytest.raises(SearchBudgetExhausted):
        find_tehvi_variance_counterexample(CounterexampleSearch(kind="ehvi", n_trials=10**4, seed=0))


def test_counterexample_json_round_trip(tmp_path):
    cx = find_tehvi_variance_counterexample(CounterexampleSearch(seed=2, n_trials=1000))
    cx.save(tmp_path / "cx.json")
    assert VarianceCounterexample.load(tmp_path / "cx.json") == cx
