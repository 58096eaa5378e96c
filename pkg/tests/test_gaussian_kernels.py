import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pareto_acq.gaussian_kernels import (
    TruncationMassError,
    ei_exceed,
    ei_shortfall,
    shortfall_layer_cake,
    std_normal_cdf,
    std_normal_pdf,
    truncated_ei_exceed,
)

finite = st.floats(-8, 8, allow_nan=False)
positive = st.floats(0.05, 5, allow_nan=False)


def test_normal_reference_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_pdf(0.0) == pytest.approx(0.3989422804014327, abs=1e-15)
    # 0.5 * (1 + erf(1/sqrt 2)) from the math module
    assert std_normal_cdf(1.0) == pytest.approx(0.5 * (1 + math.erf(1 / math.sqrt(2))), abs=1e-15)
    assert std_normal_cdf(1.0) == pytest.approx(0.8413447461, abs=1e-10)


def test_cdf_lower_tail_keeps_relative_accuracy():
    # Phi(-30) ~ 4.9e-198; 1 - Phi(30) would underflow to 0
    assert std_normal_cdf(-30.0) == pytest.approx(4.906713927148187e-198, rel=1e-12)


def test_pdf_is_derivative_of_cdf():
    u = np.linspace(-5, 5, 41)
    h = 1e-5
    fd = (std_normal_cdf(u + h) - std_normal_cdf(u - h)) / (2 * h)
    assert np.allclose(fd, std_normal_pdf(u), atol=1e-10)


@pytest.mark.parametrize(
    "c,mu,s,expected",
    [(0.0, 0.0, 1.0, 0.3989422804014327), (1.0, 0.0, 1.0, 1.0833154705876864), (1.0, 3.0, 0.0, 0.0)],
)
def test_ei_shortfall_examples(c, mu, s, expected):
    assert ei_shortfall(c, mu, s) == pytest.approx(expected, abs=1e-10)


def test_ei_shortfall_at_one_matches_closed_form():
    expected = std_normal_cdf(1.0) + std_normal_pdf(1.0)
    assert ei_shortfall(1.0, 0.0, 1.0) == pytest.approx(expected, abs=1e-15)


def test_ei_exceed_examples():
    assert ei_exceed(0.0, 0.0, 1.0) == pytest.approx(0.3989422804014327, abs=1e-15)
    assert ei_exceed(0.0, 1.0, 0.0) == 1.0
    assert ei_exceed(2.0, 1.0, 0.0) == 0.0


@given(finite, finite, st.floats(0.0, 5.0))
def test_exceed_is_reflected_shortfall(t, mu, s):
    assert ei_exceed(t, mu, s) == ei_shortfall(-t, -mu, s)


def test_broadcasting_and_scalar_output():
    out = ei_shortfall(np.zeros((3, 2)), np.array([0.0, 1.0]), 1.0)
    assert out.shape == (3, 2)
    assert isinstance(ei_shortfall(0.0, 0.0, 1.0), float)


@given(finite, finite, positive, st.floats(0.0, 2.0))
def test_shortfall_nondecreasing_in_std(c, mu, s, ds):
    assert ei_shortfall(c, mu, s + ds) >= ei_shortfall(c, mu, s) - 1e-12


@given(finite, finite, positive, st.floats(0.0, 2.0))
def test_shortfall_nondecreasing_in_threshold(c, mu, s, dc):
    assert ei_shortfall(c + dc, mu, s) >= ei_shortfall(c, mu, s) - 1e-12


def test_layer_cake_identity_on_grid():
    rng = np.random.default_rng(1)
    for _ in range(100):
        c, mu = rng.uniform(-3, 3, 2)
        s = rng.uniform(0.1, 2.0)
        assert ei_shortfall(c, mu, s) == pytest.approx(shortfall_layer_cake(c, mu, s), abs=1e-8)


def test_derivative_in_std_is_pdf():
    rng = np.random.default_rng(2)
    c, mu = rng.uniform(-2, 2, (2, 50))
    s = rng.uniform(0.3, 2.0, 50)
    h = 1e-5
    fd = (ei_shortfall(c, mu, s + h) - ei_shortfall(c, mu, s - h)) / (2 * h)
    target = std_normal_pdf((c - mu) / s)
    assert np.all(np.abs(fd - target) <= 1e-6 * target)


def test_truncation_vanishes_for_wide_box():
    rng = np.random.default_rng(3)
    t, mu = rng.uniform(-10, 10, (2, 200))
    s = rng.uniform(0.1, 10, 200)
    a = truncated_ei_exceed(t, mu, s, -1e6, 1e6)
    assert np.allclose(a, ei_exceed(t, mu, s), atol=1e-9)


def test_truncated_threshold_above_box_is_zero():
    assert truncated_ei_exceed(2.0, 0.0, 1.0, -1.0, 1.5) == 0.0
    assert truncated_ei_exceed(1.5, 0.0, 1.0, -1.0, 1.5) == 0.0


def test_truncated_half_line_mean():
    # E[Y | Y > 0] for a standard normal is 2 phi(0)
    assert truncated_ei_exceed(0.0, 0.0, 1.0, 0.0, 1e6) == pytest.approx(0.7978845608028654, abs=1e-12)


def test_truncated_half_line_mean_by_sampling():
    from scipy.stats import truncnorm

    y = truncnorm.rvs(0.0, np.inf, size=10**7, random_state=np.random.default_rng(4))
    se = y.std() / np.sqrt(len(y))
    assert abs(y.mean() - truncated_ei_exceed(0.0, 0.0, 1.0, 0.0, 1e6)) < 3 * se


def test_truncated_infinite_bounds():
    assert truncated_ei_exceed(0.5, 0.2, 1.3, -np.inf, np.inf) == pytest.approx(ei_exceed(0.5, 0.2, 1.3), abs=1e-14)


@given(finite, finite, positive, st.floats(-3, 3), st.floats(0.1, 4))
def test_truncated_bounded_by_box(t, mu, s, a, width):
    b = a + width
    try:
        v = truncated_ei_exceed(t, mu, s, a, b)
    except TruncationMassError:
        return
    assert 0.0 <= v <= max(b - t, 0.0) + 1e-12


def test_truncation_mass_underflow_raises():
    with pytest.raises(TruncationMassError):
        truncated_ei_exceed(0.0, 0.0, 1.0, 50.0, 51.0)


def test_truncated_point_mass():
    assert truncated_ei_exceed(0.0, 0.5, 0.0, 0.0, 1.0) == 0.5
    with pytest.raises(TruncationMassError):
        truncated_ei_exceed(0.0, 2.0, 0.0, 0.0, 1.0)
