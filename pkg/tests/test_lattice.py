from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlx.claim import identity, indicator, parse_claim, threshold
from nlx.errors import DomainError
from nlx.lattice import binomial_weights, build_lattice, plain_expectation, terminal_slice

from oracles import exact_binomial_mean, normal_sf


def test_build_examples():
    assert build_lattice(1.0, 1).states(1).tolist() == [-1.0, 1.0]
    assert build_lattice(1.0, 4).node_state(4, 2) == 0.0
    assert build_lattice(2.0, 8).node_state(8, 8) == pytest.approx(4.0, abs=1e-15)
    assert build_lattice(1.0, 5).node_state(0, 0) == 0.0


@pytest.mark.parametrize("T, n", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5), (math.inf, 3)])
def test_build_rejects(T, n):
    with pytest.raises(DomainError):
        build_lattice(T, n)


def test_node_state_range():
    g = build_lattice(1.0, 3)
    with pytest.raises(IndexError):
        g.node_state(4, 0)
    with pytest.raises(IndexError):
        g.node_state(2, 3)


@given(st.floats(0.01, 5), st.integers(1, 60), st.data())
def test_recombination_and_increments(T, n, data):
    g = build_lattice(T, n)
    i = data.draw(st.integers(0, n - 1))
    j = data.draw(st.integers(0, i))
    s = g.node_state(i, j)
    up, down = g.node_state(i + 1, j + 1), g.node_state(i + 1, j)
    assert 0.5 * (up - s) + 0.5 * (down - s) == pytest.approx(0.0, abs=1e-12)
    assert 0.5 * (up - s) ** 2 + 0.5 * (down - s) ** 2 == pytest.approx(g.dt, rel=1e-12)
    if i + 2 <= n:
        # up-then-down and down-then-up both land back on the starting state
        assert g.node_state(i + 2, j + 1) == s
        assert g.node_state(i + 1, j + 1) - g.sqrt_dt == pytest.approx(g.node_state(i + 1, j) + g.sqrt_dt, abs=1e-12)


def test_terminal_slice_examples():
    assert terminal_slice(build_lattice(1, 1), threshold(1)).tolist() == [0.0, 1.0]
    assert terminal_slice(build_lattice(1, 2), indicator(1, 2)).tolist() == [0.0, 0.0, 1.0]
    np.testing.assert_allclose(terminal_slice(build_lattice(1, 2), identity(10)), [-math.sqrt(2), 0, math.sqrt(2)],
                               atol=1e-15)


@pytest.mark.parametrize("n", [1, 7, 100, 1000, 4096])
def test_weights_sum_to_one(n):
    w = binomial_weights(n)
    assert abs(w.sum() - 1.0) <= 1e-12
    if n <= 100:
        exact = np.array([math.comb(n, j) / 2 ** n for j in range(n + 1)])
        np.testing.assert_allclose(w, exact, rtol=1e-12)


def test_plain_expectation_matches_exact_binomial():
    g = build_lattice(1.0, 40)
    vals = terminal_slice(g, parse_claim("logistic:2"))
    assert plain_expectation(g, vals) == pytest.approx(exact_binomial_mean(vals), abs=1e-14)


def test_threshold_converges_to_normal_tail():
    errs = []
    for n in (250, 1000, 4000):
        g = build_lattice(1.0, n)
        errs.append(abs(plain_expectation(g, terminal_slice(g, threshold(0.3))) - normal_sf(0.3)))
    # O(1/sqrt(n)): at most a constant times n^-1/2
    for e, n in zip(errs, (250, 1000, 4000)):
        assert e <= 0.5 / math.sqrt(n)
