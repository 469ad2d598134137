"""g-capacities V(A) = E_g[I(W_T in A)] and Choquet integrals against them."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bsde import backward_values, check_solver_config
from .claim import Interval, TerminalClaim, comonotonic_check, interval_indicator, superlevel_set
from .driver import Driver
from .errors import DomainError, PreconditionError
from .lattice import build_lattice, terminal_slice

ROUNDING_FLOOR = 1e-12


def thread_count() -> int:
    """Worker threads allowed by ``NLX_THREADS`` (0 or unset: sequential)."""
    try:
        return max(0, int(os.environ.get("NLX_THREADS", "0")))
    except ValueError:
        return 0


def check_intervals(A: Sequence[Interval]) -> list[Interval]:
    out = [Interval(float(lo), float(hi)) for lo, hi in A]
    for lo, hi in out:
        if not lo < hi:
            raise DomainError(f"empty or reversed interval [{lo}, {hi})")
    for a, b in zip(out, out[1:]):
        if b.lo < a.hi:
            raise DomainError(f"intervals {a} and {b} overlap or are unsorted")
    return out


@dataclass(eq=False)
class Capacity:
    """Set function A -> E_g[I_A(W_T)] on a fixed lattice.

    Solves are cached on the lattice terminal slice, which fully determines
    the result, so the cache never changes a value.
    """

    driver: Driver
    T: float
    n_steps: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.grid = build_lattice(self.T, self.n_steps)
        check_solver_config(self.grid, self.driver)

    def _solve(self, slices: np.ndarray) -> np.ndarray:
        workers = thread_count()
        if workers <= 1 or len(slices) < 2:
            return backward_values(self.grid, self.driver, slices, check=False)
        chunks = np.array_split(slices, min(workers, len(slices)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: backward_values(self.grid, self.driver, c, check=False), chunks))
        return np.concatenate(parts)

    def evaluate_many(self, sets: Sequence[Sequence[Interval]]) -> list[float]:
        slices = [terminal_slice(self.grid, interval_indicator(check_intervals(A))) for A in sets]
        keys = [s.tobytes() for s in slices]
        todo = {}
        for k, s in zip(keys, slices):
            if k not in self._cache and k not in todo:
                todo[k] = s
        if todo:
            values = self._solve(np.stack(list(todo.values())))
            self._cache.update(zip(todo.keys(), values.tolist()))
        return [self._cache[k] for k in keys]

    def __call__(self, A: Sequence[Interval]) -> float:
        return self.evaluate_many([A])[0]


def g_capacity(cap: Capacity, A: Sequence[Interval]) -> float:
    return cap(A)


@dataclass(frozen=True)
class ChoquetResult:
    value: float
    n_thresholds: int
    quadrature_error_estimate: float
    per_threshold: tuple[tuple[float, float], ...]

    def table(self) -> list[tuple[float, float, float]]:
        """Rows ``(s, V(f >= s), running integral)`` in ascending threshold order."""
        rows, acc = [], 0.0
        if not self.per_threshold:
            return rows
        ss = [s for s, _ in self.per_threshold]
        h = ss[1] - ss[0] if len(ss) > 1 else 0.0
        for s, v in self.per_threshold:
            acc += _cell(s - h / 2, s + h / 2, v)
            rows.append((s, v, acc))
        return rows


def _cell(a: float, b: float, v: float) -> float:
    """Exact integral over [a, b] of the two-branch integrand with V held at v."""
    neg = max(0.0, min(b, 0.0) - a)
    pos = (b - a) - neg
    return (v - 1.0) * neg + v * pos


def _thresholds(f_min: float, f_max: float, n: int) -> np.ndarray:
    h = (f_max - f_min) / n
    return f_min + (np.arange(n) + 0.5) * h


def _compose(f_min: float, f_max: float, values: Sequence[float]) -> float:
    """int_{-inf}^0 (V - 1) ds + int_0^inf V ds with V piecewise constant on the grid cells.

    Outside [f_min, f_max] V is 1 below and 0 above, which contributes
    exactly ``f_min`` when f_min > 0 and ``f_max`` when f_max < 0.
    """
    n = len(values)
    h = (f_max - f_min) / n
    total = 0.0
    for k, v in enumerate(values):
        total += _cell(f_min + k * h, f_min + (k + 1) * h, v)
    if f_min > 0:
        total += f_min
    if f_max < 0:
        total += f_max
    return total


def choquet_expectation(cap: Capacity, f: TerminalClaim, n_thresholds: int = 200) -> ChoquetResult:
    """Layer-cake integral of V(f >= s) by the midpoint rule on [f_min, f_max].

    The error estimate is the change against the same rule on ``n // 2`` cells.
    """
    if n_thresholds < 2:
        raise ValueError("n_thresholds must be >= 2")
    f_min, f_max = f.bounds
    if f_min == f_max:
        return ChoquetResult(_compose(f_min, f_max, [1.0]), n_thresholds, 0.0, ())
    fine = _thresholds(f_min, f_max, n_thresholds)
    coarse = _thresholds(f_min, f_max, n_thresholds // 2)
    levels = np.concatenate([fine, coarse])
    values = cap.evaluate_many([superlevel_set(f, s) for s in levels])
    v_fine, v_coarse = values[: len(fine)], values[len(fine):]
    value = _compose(f_min, f_max, v_fine)
    estimate = abs(value - _compose(f_min, f_max, v_coarse))
    return ChoquetResult(value, n_thresholds, estimate,
                         tuple(zip(fine.tolist(), v_fine)))


@dataclass(frozen=True)
class GapResult:
    e_f: float
    e_h: float
    e_joint: float
    g_gap: float
    g_gap_error: float
    c_f: float
    c_h: float
    c_joint: float
    choquet_gap: float
    choquet_gap_error: float

    @property
    def e_sum_parts(self) -> float:
        return self.e_f + self.e_h

    @property
    def c_sum_parts(self) -> float:
        return self.c_f + self.c_h


def _gaps_at(driver: Driver, f: TerminalClaim, h: TerminalClaim, T: float, n_steps: int,
             n_thresholds: int):
    grid = build_lattice(T, n_steps)
    fh = f + h
    slices = np.stack([terminal_slice(grid, c) for c in (f, h, fh)])
    e_f, e_h, e_j = backward_values(grid, driver, slices).tolist()
    cap = Capacity(driver, T, n_steps)
    cf, ch, cj = (choquet_expectation(cap, c, n_thresholds) for c in (f, h, fh))
    return (e_f, e_h, e_j), (cf, ch, cj)


def additivity_gaps(driver: Driver, f: TerminalClaim, h: TerminalClaim, T: float, n_steps: int,
                    n_thresholds: int = 200, probe_points: int = 200) -> GapResult:
    """Additivity defects of E_g and of the Choquet integral on a comonotonic pair.

    Errors combine the lattice Richardson change (n vs n // 2), the
    quadrature estimates (Choquet side only) and a rounding floor.
    """
    if not comonotonic_check(f, h, probe_points):
        raise PreconditionError(f"claims {f.label!r} and {h.label!r} are not comonotonic")
    (e_f, e_h, e_j), (cf, ch, cj) = _gaps_at(driver, f, h, T, n_steps, n_thresholds)
    (e_f2, e_h2, e_j2), (cf2, ch2, cj2) = _gaps_at(driver, f, h, T, max(1, n_steps // 2), n_thresholds)
    g_gap = e_j - e_f - e_h
    c_gap = cj.value - cf.value - ch.value
    g_err = abs(g_gap - (e_j2 - e_f2 - e_h2)) + ROUNDING_FLOOR
    c_err = (abs(c_gap - (cj2.value - cf2.value - ch2.value))
             + cf.quadrature_error_estimate + ch.quadrature_error_estimate
             + cj.quadrature_error_estimate + ROUNDING_FLOOR)
    return GapResult(e_f, e_h, e_j, g_gap, g_err, cf.value, ch.value, cj.value, c_gap, c_err)
