"""Explicit finite differences for u_t = u_xx / 2 + g(u, u_x), u(0, x) = f(x),
and the cross-check u(t, x) = E_g[f(W_t + x)] against the lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bsde import g_expectation
from .claim import TerminalClaim
from .driver import Custom, Driver, KappaIgnorance, Linear, Zero
from .errors import ConfigurationError, PreconditionError

PADDING_SDS = 6.0


@dataclass(frozen=True, eq=False)
class PdeSurface:
    """Snapshots ``u[k]`` at ``times[k]`` on ``x_grid``; ``u[0]`` is f on the grid."""

    u: np.ndarray
    times: np.ndarray
    x_grid: np.ndarray
    dt_pde: float
    dx: float
    n_time_steps: int

    def at(self, x, level: int = -1):
        """Linear interpolation of a stored level (default: the last)."""
        return np.interp(x, self.x_grid, self.u[level])

    def rows(self):
        for t, level in zip(self.times, self.u):
            for x, val in zip(self.x_grid, level):
                yield float(t), float(x), float(val)


def _time_homogeneous(spec: Driver) -> None:
    if isinstance(spec, Linear) and not spec.nu.is_constant:
        raise PreconditionError("the PDE solver needs a time-independent nu")
    if isinstance(spec, KappaIgnorance) and not (spec.mu.is_constant and spec.nu.is_constant):
        raise PreconditionError("the PDE solver needs time-independent mu and nu")
    if not isinstance(spec, (Zero, Linear, KappaIgnorance, Custom)):
        raise PreconditionError(f"unsupported driver {spec!r}")


def check_padding(f: TerminalClaim, t_end: float, x_lo: float, x_hi: float) -> None:
    region = f.active_region()
    if region is None:
        return
    pad = PADDING_SDS * math.sqrt(t_end)
    if region[0] - pad < x_lo or region[1] + pad > x_hi:
        raise ConfigurationError(
            f"claim varies on [{region[0]}, {region[1]}], which must sit {pad:.3g} inside "
            f"[{x_lo}, {x_hi}]; widen the domain")


def solve_nonlinear_heat(spec: Driver, f: TerminalClaim, t_end: float, x_lo: float, x_hi: float,
                         nx: int, safety: float = 0.9, n_snapshots: int = 101) -> PdeSurface:
    """Forward Euler in time, central differences for u_xx and u_x.

    The step is ``safety * dx**2 / 2`` shrunk by ``1 / (1 + dt L)``, then
    rounded down so an integer number of steps reaches ``t_end``. Boundary
    values stay at f(x_lo), f(x_hi). Custom drivers are evaluated at t = 0.
    """
    if not x_lo < x_hi:
        raise ValueError("need x_lo < x_hi")
    if nx < 3:
        raise ValueError("need nx >= 3")
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    _time_homogeneous(spec)
    check_padding(f, t_end, x_lo, x_hi)

    x = np.linspace(x_lo, x_hi, nx)
    dx = x[1] - x[0]
    lip = spec.lipschitz_bound
    if lip * dx > 1.0:
        raise ConfigurationError(f"Lipschitz bound {lip} times dx={dx} exceeds 1; increase nx")
    dt0 = safety * dx * dx / 2
    dt_max = dt0 / (1.0 + dt0 * lip)
    steps = max(1, math.ceil(t_end / dt_max))
    dt = t_end / steps

    u = np.asarray(f(x), dtype=float).copy()
    keep = sorted(set(np.linspace(0, steps, max(2, n_snapshots)).round().astype(int).tolist()))
    snaps, times = [u.copy()], [0.0]
    inv_dx2, inv_2dx = 1.0 / (dx * dx), 1.0 / (2 * dx)
    next_keep = 1
    for k in range(1, steps + 1):
        mid = u[1:-1]
        uxx = (u[2:] - 2.0 * mid + u[:-2]) * inv_dx2
        ux = (u[2:] - u[:-2]) * inv_2dx
        new = u.copy()
        new[1:-1] = mid + dt * (0.5 * uxx + spec(mid, ux, 0.0))
        u = new
        if next_keep < len(keep) and k == keep[next_keep]:
            snaps.append(u.copy())
            times.append(k * dt)
            next_keep += 1
    times[-1] = t_end
    return PdeSurface(np.array(snaps), np.array(times), x, dt, dx, steps)


def compare_domain(f: TerminalClaim, t_end: float, x_points: Sequence[float], nx: int) -> tuple[float, float]:
    """A domain padded around the claim's active region and the query points.

    The grid is offset so the first breakpoint falls midway between nodes,
    which keeps a jump there from being sampled on one side only.
    """
    region = f.active_region() or (0.0, 0.0)
    pad = PADDING_SDS * math.sqrt(t_end) + 0.5
    lo_need = min(region[0] - pad, min(x_points) - 1.0)
    hi_need = max(region[1] + pad, max(x_points) + 1.0)
    dx = (hi_need - lo_need) / (nx - 3)
    x_lo = region[0] - (math.ceil((region[0] - lo_need) / dx) + 0.5) * dx
    return x_lo, x_lo + (nx - 1) * dx


@dataclass(frozen=True)
class ComparisonRow:
    x: float
    u_pde: float
    e_g_lattice: float
    diff: float


def feynman_kac_compare(spec: Driver, f: TerminalClaim, t_end: float, x_points: Sequence[float],
                        nx: int = 3001, n_steps: int = 8001) -> list[ComparisonRow]:
    x_lo, x_hi = compare_domain(f, t_end, x_points, nx)
    surface = solve_nonlinear_heat(spec, f, t_end, x_lo, x_hi, nx)
    rows = []
    for x in x_points:
        u = float(surface.at(x))
        e = g_expectation(f.shifted(x), spec, t_end, n_steps)
        rows.append(ComparisonRow(float(x), u, e, abs(u - e)))
    return rows

