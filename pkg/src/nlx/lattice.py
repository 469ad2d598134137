"""Recombining binomial lattice for one-dimensional Brownian motion on [0, T]."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .claim import TerminalClaim
from .errors import DomainError


@dataclass(frozen=True)
class LatticeGrid:
    """Node ``(i, j)`` sits at time ``i * dt`` and state ``(2j - i) * sqrt(dt)``;
    up and down moves each have probability 1/2."""

    T: float
    n_steps: int

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def sqrt_dt(self) -> float:
        return math.sqrt(self.dt)

    def time(self, i: int) -> float:
        return i * self.dt

    def node_state(self, i: int, j: int) -> float:
        if not (0 <= i <= self.n_steps and 0 <= j <= i):
            raise IndexError(f"node ({i}, {j}) outside the lattice")
        return (2 * j - i) * self.sqrt_dt

    def states(self, i: int) -> np.ndarray:
        if not 0 <= i <= self.n_steps:
            raise IndexError(f"step {i} outside [0, {self.n_steps}]")
        return (2 * np.arange(i + 1) - i) * self.sqrt_dt

    @property
    def max_state(self) -> float:
        return self.n_steps * self.sqrt_dt


def build_lattice(T: float, n_steps: int) -> LatticeGrid:
    if not (isinstance(T, (int, float)) and math.isfinite(T) and T > 0):
        raise DomainError(f"T must be positive, got {T!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise DomainError(f"n_steps must be a positive integer, got {n_steps!r}")
    return LatticeGrid(float(T), int(n_steps))


def terminal_slice(grid: LatticeGrid, f: TerminalClaim) -> np.ndarray:
    return np.asarray(f(grid.states(grid.n_steps)), dtype=float)


def binomial_weights(i: int) -> np.ndarray:
    """Node probabilities at step ``i`` by Pascal recursion, w[j] = C(i, j) / 2**i."""
    w = np.ones(1)
    for _ in range(i):
        w = 0.5 * (np.append(w, 0.0) + np.append(0.0, w))
    return w


def plain_expectation(grid: LatticeGrid, values: np.ndarray) -> float:
    """Binomial expectation of a terminal slice."""
    return float(binomial_weights(grid.n_steps) @ values)
