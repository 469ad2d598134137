from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlx.bsde import (
    FIXED_POINT_TOL,
    conditional_slice,
    g_expectation,
    representation_slope,
    richardson,
    solve_bsde,
    solve_terminal,
    z_sign_report,
)
from nlx.claim import constant, identity, indicator, logistic, parse_claim, threshold
from nlx.driver import Custom, KappaIgnorance, Linear, TimeFunction, Zero
from nlx.errors import ConfigurationError, PreconditionError
from nlx.lattice import build_lattice, plain_expectation, terminal_slice

import oracles

C = TimeFunction.constant
KAPPA = KappaIgnorance(C(0.5), C(0.0))
Y_DRIVER = Custom(lambda y, z, t: 0.4 * np.sin(y) * np.abs(z) + 0.3 * z, lipschitz=1.0)


@pytest.mark.parametrize("driver, g", [
    (KappaIgnorance(C(0.5), C(0.3)), lambda y, z, t: 0.5 * abs(z) + 0.3 * z),
    (KappaIgnorance(TimeFunction.from_pairs([(0, 0.1), (1, 0.9)])),
     lambda y, z, t: (0.1 + 0.8 * t) * abs(z)),
    (Y_DRIVER, lambda y, z, t: 0.4 * math.sin(y) * abs(z) + 0.3 * z),
])
@pytest.mark.parametrize("text", ["indicator:1,2", "logistic:2"])
def test_solver_matches_brute_force(driver, g, text):
    grid = build_lattice(1.0, 60)
    f = parse_claim(text)
    surf = solve_bsde(grid, f, driver)
    y, z = oracles.brute_force_bsde(g, terminal_slice(grid, f), 1.0, 60)
    for i in (0, 1, 30, 59):
        np.testing.assert_allclose(surf.y[i], y[i], atol=1e-11)
        np.testing.assert_allclose(surf.z[i], z[i], atol=1e-11)


def test_surface_satisfies_one_step_relation():
    grid = build_lattice(1.0, 80)
    surf = solve_bsde(grid, logistic(2), Y_DRIVER)
    for i in range(grid.n_steps):
        y, z = surf.y[i], surf.z[i]
        children = 0.5 * (surf.y[i + 1][1:] + surf.y[i + 1][:-1])
        lhs = y - Y_DRIVER(y, z, grid.time(i)) * grid.dt
        assert np.max(np.abs(lhs - children)) <= 2 * FIXED_POINT_TOL


def test_constant_claim_is_stationary():
    for driver in (Zero(), KAPPA, Y_DRIVER):
        surf = solve_bsde(build_lattice(1.0, 50), constant(0.7), driver)
        for i in range(51):
            assert np.all(surf.y[i] == 0.7)
        assert all(np.all(z == 0.0) for z in surf.z)


def test_zero_driver_is_plain_expectation():
    grid = build_lattice(1.0, 300)
    f = indicator(1, 2)
    assert solve_bsde(grid, f, Zero()).value == pytest.approx(
        oracles.exact_binomial_mean(terminal_slice(grid, f)), abs=1e-13)


def test_examples_against_oracles():
    assert g_expectation(identity(100), KAPPA, 1.0, 2000) == pytest.approx(0.5, abs=2e-3)
    assert g_expectation(threshold(1), Zero(), 1.0, 2000) == pytest.approx(oracles.normal_sf(1.0), abs=2e-3)
    assert g_expectation(threshold(1), Linear(C(0.3)), 1.0, 2000) == pytest.approx(oracles.normal_sf(0.7), abs=2e-3)


def test_kappa_threshold_matches_exact_binomial():
    # for an increasing claim z >= 0, so the kappa driver is a constant drift:
    # y_0 = E[f] under up-probability (1 + 0.5 sqrt(dt)) / 2 exactly
    n, T = 400, 1.0
    grid = build_lattice(T, n)
    p = 0.5 * (1 + 0.5 * grid.sqrt_dt)
    vals = terminal_slice(grid, threshold(1))
    exact = sum(math.comb(n, j) * p ** j * (1 - p) ** (n - j) * v for j, v in enumerate(vals))
    assert g_expectation(threshold(1), KAPPA, T, n) == pytest.approx(exact, abs=1e-12)


def test_conditional_slice():
    grid = build_lattice(1.0, 20)
    f = indicator(1, 2)
    surf = solve_bsde(grid, f, KAPPA)
    last = conditional_slice(surf, 20)
    assert [v for _, v in last] == terminal_slice(grid, f).tolist()
    first = conditional_slice(surf, 0)
    assert first == [(0.0, surf.value)]
    with pytest.raises(IndexError):
        conditional_slice(surf, 21)
    assert all(v == 0.2 for _, v in conditional_slice(solve_bsde(grid, constant(0.2), KAPPA), 7))


def test_tower_property():
    grid = build_lattice(1.0, 200)
    surf = solve_bsde(grid, indicator(1, 2), KAPPA)
    for i in (50, 100, 199):
        sub = solve_terminal(build_lattice(grid.time(i), i), KAPPA, surf.y[i])
        assert abs(sub.value - surf.value) <= 1e-12


def test_z_sign_reports():
    grid = build_lattice(1.0, 500)
    inc = z_sign_report(solve_bsde(grid, threshold(1), KAPPA))
    assert inc.min_z >= -1e-12 and inc.fraction_negative == 0.0
    mixed = z_sign_report(solve_bsde(grid, indicator(1, 2), KAPPA))
    assert mixed.fraction_negative > 0 and mixed.fraction_positive > 0
    assert mixed.fraction_negative + mixed.fraction_positive <= 1.0 + 1e-12
    dec = z_sign_report(solve_bsde(grid, 1 - logistic(2), KAPPA))
    assert dec.max_z <= 1e-12


def test_representation_slope_examples():
    for s, slope in representation_slope(KAPPA, 2.0, [0.1, 0.05]):
        assert slope == pytest.approx(1.0, abs=5e-3)
    for s, slope in representation_slope(Zero(), 3.0, [0.1, 0.01]):
        assert abs(slope) <= 1e-12
    [(s, slope)] = representation_slope(Linear(C(0.3)), -1.0, [0.1])
    assert slope == pytest.approx(-0.3, abs=5e-3)
    with pytest.raises(ValueError):
        representation_slope(KAPPA, 1.0, [0.0])


def test_richardson_pairs_n_and_half():
    seen = []
    value, err = richardson(lambda n: seen.append(n) or float(n), 10)
    assert seen == [10, 5] and (value, err) == (10.0, 5.0)


def test_contraction_condition():
    steep = Custom(lambda y, z, t: 10 * z, lipschitz=10.0)
    with pytest.raises(ConfigurationError, match="increase n_steps"):
        g_expectation(threshold(1), steep, 1.0, 10)
    with pytest.raises(PreconditionError):
        g_expectation(threshold(1), Custom(lambda y, z, t: np.abs(z) + 0.1, lipschitz=1.0), 1.0, 100)


def test_horizon_beyond_driver_domain():
    spec = KappaIgnorance(TimeFunction.from_pairs([(0, 0.5), (1, 0.5)]))
    with pytest.raises(ConfigurationError):
        g_expectation(threshold(1), spec, 2.0, 100)


@given(st.floats(-1, 1), st.floats(-1, 1), st.sampled_from(["threshold:0.5", "indicator:-1,1", "logistic:3"]))
def test_linear_driver_additive_at_every_node(nu, c, text):
    grid = build_lattice(1.0, 120)
    drv = Linear(C(nu))
    f, h = parse_claim(text), c * logistic(1.0)
    sf, sh, sj = (solve_bsde(grid, x, drv) for x in (f, h, f + h))
    for i in range(0, 121, 20):
        assert np.max(np.abs(sj.y[i] - sf.y[i] - sh.y[i])) <= 1e-12


@given(st.floats(0, 1), st.floats(-0.5, 0.5))
def test_comparison_on_random_dominance(mu, nu):
    grid = build_lattice(1.0, 150)
    drv = KappaIgnorance(C(mu), C(nu))
    h = logistic(2)
    f = h + 0.3 * threshold(0.5)
    sf, sh = solve_bsde(grid, f, drv), solve_bsde(grid, h, drv)
    for i in range(151):
        assert np.all(sf.y[i] >= sh.y[i] - 1e-12)


def test_strict_conditional_nonadditivity():
    f, h = threshold(1), indicator(1, 2)

    def worst(n):
        grid = build_lattice(1.0, n)
        sf, sh, sj = (solve_bsde(grid, x, KAPPA) for x in (f, h, f + h))
        return float(np.min(sj.y[0] - sf.y[0] - sh.y[0]))

    value, err = richardson(worst, 2000)
    assert value < 0 and abs(value) > 5 * err


def test_batch_rows_are_independent():
    from nlx.bsde import backward_values
    grid = build_lattice(1.0, 100)
    rows = np.stack([terminal_slice(grid, parse_claim(t)) for t in ("threshold:1", "logistic:2", "indicator:0,1")])
    batch = backward_values(grid, Y_DRIVER, rows)
    for r, v in zip(rows, batch):
        assert backward_values(grid, Y_DRIVER, r) == v
