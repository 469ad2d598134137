from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlx.claim import TerminalClaim, identity, indicator, logistic, parse_claim, threshold
from nlx.closedform import (
    GaussianSpec,
    gaussian_expectation,
    girsanov_linear_expectation,
    monotone_kappa_expectation,
    normal_cdf,
    normal_pdf,
    normal_sf,
    threshold_claim_solution,
    window_claim_z,
)
from nlx.driver import TimeFunction
from nlx.errors import DomainError, PreconditionError

import oracles

C = TimeFunction.constant


def test_normal_examples():
    assert normal_pdf(0.0) == pytest.approx(0.39894228, abs=1e-8)
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.0) == pytest.approx(0.841345, abs=1e-6)
    assert normal_cdf(1.0) == pytest.approx(oracles.phi_series(1.0), abs=1e-14)


@given(st.floats(-3, 3))
def test_cdf_against_series(x):
    assert abs(normal_cdf(x) - oracles.phi_series(x)) <= 1e-12
    assert abs(normal_sf(x) - (1 - oracles.phi_series(x))) <= 1e-12


@given(st.floats(-8, 8))
def test_cdf_against_scipy(x):
    from scipy import special
    assert abs(normal_cdf(x) - special.ndtr(x)) <= 1e-12


@pytest.mark.parametrize("text", ["threshold:1", "indicator:1,2", "identity:10", "logistic:2"])
@pytest.mark.parametrize("mean, var", [(0.0, 1.0), (0.3, 1.0), (-0.7, 2.5)])
def test_gaussian_expectation_against_quadrature(text, mean, var):
    f = parse_claim(text)
    want = oracles.gauss_expect(f, mean, var, f.finite_breakpoints)
    assert gaussian_expectation(f, GaussianSpec(mean, var)) == pytest.approx(want, abs=1e-10)


def test_girsanov_examples():
    assert girsanov_linear_expectation(identity(100), C(0.3), 1.0) == pytest.approx(0.3, abs=1e-12)
    assert girsanov_linear_expectation(threshold(1), C(0.0), 1.0) == pytest.approx(0.158655, abs=1e-6)
    assert girsanov_linear_expectation(threshold(1), C(0.3), 1.0) == pytest.approx(0.241964, abs=1e-6)


@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(0.1, 3))
def test_girsanov_threshold_identity(a, nu, T):
    got = girsanov_linear_expectation(threshold(a), C(nu), T)
    assert abs(got - oracles.normal_sf((a - nu * T) / math.sqrt(T))) <= 1e-10


def test_girsanov_time_varying_drift():
    nu = TimeFunction.from_pairs([(0, 0.0), (1, 1.0)])
    assert girsanov_linear_expectation(threshold(1), nu, 1.0) == pytest.approx(oracles.normal_sf(0.5), abs=1e-12)


def test_gaussian_spec_rejects_nonpositive_variance():
    with pytest.raises(DomainError):
        GaussianSpec(0.0, 0.0)


def test_threshold_solution_examples():
    y, _ = threshold_claim_solution(C(0.5), 1.0, 0.0, 0.0)
    assert y == pytest.approx(0.308538, abs=1e-6)
    y, z = threshold_claim_solution(C(0.0), 1.0, 0.0, 0.0)
    assert y == pytest.approx(0.158655, abs=1e-6)
    assert z == pytest.approx(0.241971, abs=1e-6)
    y, _ = threshold_claim_solution(C(0.3), 1.0, 1.0 - 1e-9, -3.0)
    assert y < 1e-12
    with pytest.raises(DomainError):
        threshold_claim_solution(C(0.5), 1.0, 1.0, 0.0)


@given(st.floats(0, 1), st.floats(0, 0.9), st.floats(-2, 2))
def test_threshold_z_is_derivative_of_y(mu, t, w):
    h = 1e-5
    up, _ = threshold_claim_solution(C(mu), 1.0, t, w + h)
    dn, _ = threshold_claim_solution(C(mu), 1.0, t, w - h)
    _, z = threshold_claim_solution(C(mu), 1.0, t, w)
    assert z > 0
    assert abs((up - dn) / (2 * h) - z) <= 1e-7


def test_threshold_solution_uses_full_horizon_integral():
    mu = TimeFunction.from_pairs([(0, 0.0), (1, 1.0)])
    t, w_state = 0.5, 0.2
    w_bar = w_state - mu.integral(0, t)
    y, z = threshold_claim_solution(mu, 1.0, t, w_bar)
    x = 1 - mu.integral(t, 1.0) - w_state
    assert y == pytest.approx(oracles.normal_sf(x / math.sqrt(0.5)), abs=1e-14)
    assert z == pytest.approx(oracles.normal_pdf(x, 0.5), abs=1e-14)


def test_window_z_examples():
    assert window_claim_z(C(0.0), 1.0, 0.0, 0.0) == pytest.approx(0.241971 - 0.053991, abs=1e-6)
    assert abs(window_claim_z(C(0.0), 1.0, 0.0, 1.5)) <= 1e-12
    assert window_claim_z(C(0.0), 1.0, 0.0, 3.0) < 0
    with pytest.raises(DomainError):
        window_claim_z(C(0.0), 1.0, 2.0, 0.0)


@given(st.floats(0, 1), st.floats(-3, 3))
def test_window_z_sign_flip(mu, w):
    M = mu
    z = window_claim_z(C(mu), 1.0, 0.0, w)
    if w > 1.5 - M + 1e-9:
        assert z < 0
    elif w < 1.5 - M - 1e-9:
        assert z > 0


def test_monotone_kappa_examples():
    assert monotone_kappa_expectation(threshold(1), C(0.5), 1.0) == pytest.approx(0.308538, abs=1e-6)
    assert monotone_kappa_expectation(threshold(1), C(0.5), 1.0) == pytest.approx(
        threshold_claim_solution(C(0.5), 1.0, 0.0, 0.0)[0], abs=1e-15)
    assert monotone_kappa_expectation(identity(100), C(0.5), 1.0) == pytest.approx(0.5, abs=1e-12)
    dec = 1 - logistic(2)
    assert monotone_kappa_expectation(dec, C(0.5), 1.0) == pytest.approx(
        girsanov_linear_expectation(dec, C(-0.5), 1.0), abs=1e-15)


def test_monotone_kappa_refuses():
    with pytest.raises(PreconditionError):
        monotone_kappa_expectation(indicator(1, 2), C(0.5), 1.0)
    with pytest.raises(PreconditionError):
        monotone_kappa_expectation(threshold(1), C(-0.5), 1.0)


@pytest.mark.parametrize("text", ["threshold:1", "identity:10", "logistic:2"])
def test_monotone_kappa_nondecreasing_in_kappa(text):
    f = parse_claim(text)
    vals = [monotone_kappa_expectation(f, C(k), 1.0) for k in (0.0, 0.25, 0.5)]
    assert vals == sorted(vals)


def test_custom_piece_claim():
    f = TerminalClaim([None, -1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0], [0.0, 1.0, -1.0, 0.0])
    want = oracles.gauss_expect(oracles.tent, 0.2, 0.7, [-1, 0, 1])
    assert gaussian_expectation(f, GaussianSpec(0.2, 0.7)) == pytest.approx(want, abs=1e-10)
