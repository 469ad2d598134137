"""Backward induction for y_t = xi + int_t^T g(y, z, s) ds - int_t^T z dW on the lattice.

One step at node (i, j), with children u = y[i+1][j+1] and d = y[i+1][j]::

    z    = (u - d) / (2 sqrt(dt))
    ybar = (u + d) / 2
    y    = ybar + g(y, z, t_i) dt        (solved by fixed-point iteration from ybar)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import claim as _claim
from .claim import TerminalClaim
from .driver import Driver, validate_hypotheses
from .errors import ConfigurationError, PreconditionError
from .lattice import LatticeGrid, binomial_weights, build_lattice, terminal_slice

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 100
Z_SIGN_TOL = 1e-12


def check_solver_config(grid: LatticeGrid, driver: Driver) -> None:
    """Raise unless ``driver`` can be run on ``grid``.

    Requires g(y, 0, t) = 0 on the default probe grid, ``L dt < 1/2`` so the implicit
    step contracts, and ``L sqrt(dt) <= 1`` so the step is monotone in its
    children (which is what makes the lattice comparison theorem exact).
    """
    if grid.T > driver.horizon * (1 + 1e-12):
        raise ConfigurationError(f"horizon T={grid.T} exceeds the driver's time domain {driver.horizon}")
    report = validate_hypotheses(driver)
    if report.zero_z_violations:
        raise PreconditionError(f"driver violates g(y,0,t)=0 at {report.zero_z_violations[:3]}")
    lip = driver.lipschitz_bound
    if lip * grid.dt >= 0.5:
        raise ConfigurationError(
            f"Lipschitz bound {lip} times dt={grid.dt} is >= 1/2; increase n_steps")
    if lip * grid.sqrt_dt > 1.0:
        raise ConfigurationError(
            f"Lipschitz bound {lip} times sqrt(dt)={grid.sqrt_dt} exceeds 1; increase n_steps")


def _step(driver: Driver, children: np.ndarray, t: float, dt: float, sqrt_dt: float):
    up, down = children[..., 1:], children[..., :-1]
    z = (up - down) / (2.0 * sqrt_dt)
    ybar = 0.5 * (up + down)
    y = ybar + driver(ybar, z, t) * dt
    if not driver.depends_on_y:
        # a second iterate would reproduce y bit for bit
        return y, z
    diff = np.abs(y - ybar)
    active = diff > FIXED_POINT_TOL
    for _ in range(FIXED_POINT_MAX_ITER):
        if not active.any():
            return y, z
        idx = np.nonzero(active)
        prev = y[idx]
        new = ybar[idx] + np.asarray(driver(prev, z[idx], t), dtype=float) * dt
        y[idx] = new
        still = np.abs(new - prev) > FIXED_POINT_TOL
        active[idx] = still
    if active.any():
        raise ConfigurationError(
            f"fixed-point iteration did not converge in {FIXED_POINT_MAX_ITER} iterations at t={t}")
    return y, z


def backward_values(grid: LatticeGrid, driver: Driver, terminal: np.ndarray, check: bool = True):
    """Run the recursion on a terminal slice (or a batch of them, last axis = nodes).

    Returns the time-0 value(s). Every batch row is computed independently,
    so the result for a row does not depend on what else is in the batch.
    """
    if check:
        check_solver_config(grid, driver)
    y = np.array(terminal, dtype=float)
    if y.shape[-1] != grid.n_steps + 1:
        raise ValueError(f"terminal slice has {y.shape[-1]} nodes, expected {grid.n_steps + 1}")
    dt, sq = grid.dt, grid.sqrt_dt
    for i in range(grid.n_steps - 1, -1, -1):
        y, _ = _step(driver, y, grid.time(i), dt, sq)
    return y[..., 0]


@dataclass(frozen=True, eq=False)
class SolutionSurface:
    """``y[i]`` holds the conditional g-expectation on slice i; ``z[i]`` (i < n) the
    martingale-representation integrand."""

    y: tuple[np.ndarray, ...]
    z: tuple[np.ndarray, ...]
    grid: LatticeGrid
    driver: Driver
    claim: TerminalClaim | None

    @property
    def value(self) -> float:
        return float(self.y[0][0])


def solve_terminal(grid: LatticeGrid, driver: Driver, terminal: np.ndarray,
                   claim: TerminalClaim | None = None) -> SolutionSurface:
    check_solver_config(grid, driver)
    n = grid.n_steps
    ys: list[np.ndarray] = [None] * (n + 1)
    zs: list[np.ndarray] = [None] * n
    ys[n] = np.array(terminal, dtype=float)
    for i in range(n - 1, -1, -1):
        ys[i], zs[i] = _step(driver, ys[i + 1], grid.time(i), grid.dt, grid.sqrt_dt)
    for arr in ys + zs:
        arr.flags.writeable = False
    return SolutionSurface(tuple(ys), tuple(zs), grid, driver, claim)


def solve_bsde(grid: LatticeGrid, f: TerminalClaim, spec: Driver) -> SolutionSurface:
    return solve_terminal(grid, spec, terminal_slice(grid, f), claim=f)


def g_expectation(f: TerminalClaim, spec: Driver, T: float, n_steps: int) -> float:
    """E_g[f(W_T)] = y_0."""
    grid = build_lattice(T, n_steps)
    return float(backward_values(grid, spec, terminal_slice(grid, f)))


def richardson(compute: Callable[[int], float], n_steps: int) -> tuple[float, float]:
    """Return ``(value(n), |value(n) - value(n // 2)|)``."""
    fine = compute(n_steps)
    coarse = compute(max(1, n_steps // 2))
    return fine, abs(fine - coarse)


def conditional_slice(surface: SolutionSurface, i: int) -> list[tuple[float, float]]:
    """Pairs ``(state, y)`` on slice ``i``."""
    if not 0 <= i <= surface.grid.n_steps:
        raise IndexError(f"step {i} outside [0, {surface.grid.n_steps}]")
    return list(zip(surface.grid.states(i).tolist(), surface.y[i].tolist()))


@dataclass(frozen=True)
class ZSignReport:
    min_z: float
    max_z: float
    fraction_negative: float
    fraction_positive: float


def z_sign_report(surface: SolutionSurface, tol: float = Z_SIGN_TOL) -> ZSignReport:
    """Signs of z over the lattice, fractions weighted by node probability times dt.

    Values within ``tol`` of zero count as neither sign.
    """
    grid = surface.grid
    neg = pos = 0.0
    lo, hi = math.inf, -math.inf
    w = np.ones(1)
    for i in range(grid.n_steps):
        z = surface.z[i]
        lo, hi = min(lo, float(z.min())), max(hi, float(z.max()))
        neg += float(w[z < -tol].sum()) * grid.dt
        pos += float(w[z > tol].sum()) * grid.dt
        w = 0.5 * (np.append(w, 0.0) + np.append(0.0, w))
    return ZSignReport(lo, hi, neg / grid.T, pos / grid.T)


def capped_linear_claim(b: float, grid: LatticeGrid) -> TerminalClaim:
    """``b x`` capped beyond every reachable lattice state."""
    return b * _claim.identity(grid.max_state + 1.0)


def representation_slope(spec: Driver, b: float, s_list: Sequence[float],
                         n_steps: int = 200) -> list[tuple[float, float]]:
    """``(s, E_g[b W_s] / s)`` for each horizon ``s``; tends to ``g(0, b, 0)`` as s -> 0."""
    out = []
    for s in s_list:
        if not s > 0:
            raise ValueError(f"horizons must be positive, got {s!r}")
        grid = build_lattice(s, n_steps)
        f = capped_linear_claim(b, grid)
        y0 = float(backward_values(grid, spec, terminal_slice(grid, f)))
        out.append((float(s), y0 / s))
    return out
