"""BSDE drivers g(y, z, t): representation, hypothesis checks, linearity classification.

All drivers evaluate elementwise on numpy arrays for ``y`` and ``z`` with a
scalar time ``t``, which is what the lattice and PDE solvers need.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, PreconditionError

ZERO_Z_TOL = 1e-12
LINEARITY_TOL = 1e-9


@dataclass(frozen=True)
class TimeFunction:
    """Continuous piecewise-linear function of time.

    A single sample ``(t0, c)`` means the constant ``c`` on ``[t0, inf)``.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if not times or len(times) != len(values):
            raise ValueError("TimeFunction needs matching, nonempty times and values")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("TimeFunction sample times must be strictly increasing")
        if not all(math.isfinite(v) for v in values + times):
            raise ValueError("TimeFunction samples must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float) -> TimeFunction:
        return cls((0.0,), (value,))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> TimeFunction:
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def start(self) -> float:
        return self.times[0]

    @property
    def end(self) -> float:
        return math.inf if len(self.times) == 1 else self.times[-1]

    @property
    def is_constant(self) -> bool:
        return all(v == self.values[0] for v in self.values)

    def sup_abs(self) -> float:
        return max(abs(v) for v in self.values)

    def _check(self, t: float) -> None:
        slack = 1e-12 * max(1.0, abs(t))
        if not (self.start - slack <= t <= self.end + slack):
            raise DomainError(f"time {t!r} outside [{self.start}, {self.end}]")

    def __call__(self, t: float) -> float:
        t = float(t)
        self._check(t)
        if len(self.times) == 1:
            return self.values[0]
        return float(np.interp(t, self.times, self.values))

    def integral(self, a: float, b: float) -> float:
        """Exact integral over ``[a, b]`` (trapezoid rule is exact for linear pieces)."""
        if b < a:
            return -self.integral(b, a)
        self._check(a)
        self._check(b)
        if len(self.times) == 1:
            return self.values[0] * (b - a)
        inner = [t for t in self.times if a < t < b]
        knots = [a, *inner, b]
        vals = [self(t) for t in knots]
        return sum(0.5 * (v0 + v1) * (t1 - t0)
                   for t0, t1, v0, v1 in zip(knots, knots[1:], vals, vals[1:]))


class Driver:
    """Base class for drivers. Subclasses implement :meth:`_g`."""

    horizon: float = math.inf

    @property
    def lipschitz_bound(self) -> float:
        raise NotImplementedError

    @property
    def depends_on_y(self) -> bool:
        return True

    def _g(self, y, z, t: float):
        raise NotImplementedError

    def __call__(self, y, z, t: float):
        t = float(t)
        if t < 0.0 or t > self.horizon * (1 + 1e-12):
            raise DomainError(f"time {t!r} outside [0, {self.horizon}]")
        return self._g(y, z, t)

    def literal(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class Zero(Driver):
    @property
    def lipschitz_bound(self) -> float:
        return 0.0

    @property
    def depends_on_y(self) -> bool:
        return False

    def _g(self, y, z, t):
        return np.zeros(np.broadcast(y, z).shape) if np.ndim(z) or np.ndim(y) else 0.0

    def literal(self) -> str:
        return "zero"


@dataclass(frozen=True)
class Linear(Driver):
    """g = nu(t) z."""

    nu: TimeFunction

    @property
    def horizon(self) -> float:
        return self.nu.end

    @property
    def lipschitz_bound(self) -> float:
        return self.nu.sup_abs()

    @property
    def depends_on_y(self) -> bool:
        return False

    def _g(self, y, z, t):
        return self.nu(t) * (z + 0.0 * y)

    def literal(self) -> str:
        if self.nu.is_constant:
            return f"linear:{self.nu.values[0]!r}"
        return "linear:@sampled"


@dataclass(frozen=True)
class KappaIgnorance(Driver):
    """g = mu(t) |z| + nu(t) z."""

    mu: TimeFunction
    nu: TimeFunction = field(default_factory=lambda: TimeFunction.constant(0.0))

    @property
    def horizon(self) -> float:
        return min(self.mu.end, self.nu.end)

    @property
    def lipschitz_bound(self) -> float:
        return self.mu.sup_abs() + self.nu.sup_abs()

    @property
    def depends_on_y(self) -> bool:
        return False

    def _g(self, y, z, t):
        z = z + 0.0 * y
        return self.mu(t) * np.abs(z) + self.nu(t) * z

    def literal(self) -> str:
        if self.mu.is_constant and self.nu.is_constant:
            return f"kappa:{self.mu.values[0]!r},{self.nu.values[0]!r}"
        return "kappa:@sampled"


@dataclass(frozen=True)
class Custom(Driver):
    """User-supplied driver.

    ``g`` must accept numpy arrays for ``y`` and ``z`` unless ``vectorized`` is
    False, in which case it is wrapped with :func:`numpy.vectorize`.
    ``t_modulus`` bounds the jump of g between adjacent sampled times.
    """

    g: Callable
    lipschitz: float
    t_modulus: float = math.inf
    vectorized: bool = True
    name: str = "custom"

    def __post_init__(self):
        if not self.lipschitz > 0:
            raise ValueError("Custom driver needs a positive Lipschitz bound")

    @property
    def lipschitz_bound(self) -> float:
        return float(self.lipschitz)

    def _g(self, y, z, t):
        if self.vectorized or (np.ndim(y) == 0 and np.ndim(z) == 0):
            out = self.g(y, z, t)
        else:
            out = np.vectorize(lambda a, b: float(self.g(a, b, t)))(y, z)
        if np.ndim(y) or np.ndim(z):
            return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(y, z).shape)
        return float(out)

    def literal(self) -> str:
        return self.name


DriverSpec = Driver


def eval_driver(spec: Driver, y: float, z: float, t: float) -> float:
    return float(spec(y, z, t))


# -- hypothesis validation ---------------------------------------------------

@dataclass
class HypothesisReport:
    zero_z_violations: list[tuple[float, float, float]]
    lipschitz_ratio: float
    lipschitz_bound: float
    lipschitz_violations: list[tuple[tuple[float, float], tuple[float, float], float, float]]
    continuity_defects: list[tuple[float, float, float, float, float]]

    @property
    def ok(self) -> bool:
        return not (self.zero_z_violations or self.lipschitz_violations or self.continuity_defects)


def default_sample_grid(horizon: float = 1.0) -> list[tuple[float, float, float]]:
    t_end = min(1.0, horizon)
    ys = (-2.0, -1.0, 0.0, 1.0, 2.0)
    zs = (-3.0, -1.5, -0.5, 0.0, 0.5, 1.5, 3.0)
    ts = tuple(np.linspace(0.0, t_end, 5))
    return [(y, z, float(t)) for y, z, t in product(ys, zs, ts)]


def validate_hypotheses(spec: Driver, sample_grid=None) -> HypothesisReport:
    """Empirically check g(y, 0, t) = 0, the Lipschitz bound and time continuity on ``(y, z, t)`` samples.

    Nothing is raised: violations are collected in the report. The Lipschitz
    check compares the largest observed difference quotient at a common time
    against the declared bound, which is evidence, not proof.
    """
    grid = list(sample_grid) if sample_grid is not None else default_sample_grid(spec.horizon)
    if not grid:
        raise ValueError("sample grid is empty")
    pts = np.array(grid, dtype=float)
    gv = np.array([eval_driver(spec, y, z, t) for y, z, t in pts])

    # g(y, 0, t) is probed for every sampled (y, t), whether or not z=0 is on the grid
    bad_zero = []
    for y, t in sorted({(float(p[0]), float(p[2])) for p in pts}):
        v = eval_driver(spec, y, 0.0, t)
        if abs(v) > ZERO_Z_TOL:
            bad_zero.append((y, t, v))

    bound = spec.lipschitz_bound
    best = 0.0
    lip_bad = []
    for t in np.unique(pts[:, 2]):
        sel = pts[:, 2] == t
        yz, g_t = pts[sel, :2], gv[sel]
        dist = np.abs(yz[:, None, 0] - yz[None, :, 0]) + np.abs(yz[:, None, 1] - yz[None, :, 1])
        dg = np.abs(g_t[:, None] - g_t[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, dg / np.where(dist > 0, dist, 1.0), 0.0)
        best = max(best, float(ratio.max(initial=0.0)))
        for a, b in zip(*np.nonzero(np.triu(ratio > bound * (1 + 1e-9)))):
            lip_bad.append((tuple(map(float, yz[a])), tuple(map(float, yz[b])),
                            float(t), float(ratio[a, b])))

    modulus = getattr(spec, "t_modulus", math.inf)
    defects = []
    if math.isfinite(modulus):
        by_yz: dict[tuple[float, float], list[tuple[float, float]]] = {}
        for (y, z, t), v in zip(pts, gv):
            by_yz.setdefault((float(y), float(z)), []).append((float(t), float(v)))
        for (y, z), series in sorted(by_yz.items()):
            series.sort()
            for (t0, v0), (t1, v1) in zip(series, series[1:]):
                if abs(v1 - v0) > modulus:
                    defects.append((y, z, t0, t1, abs(v1 - v0)))

    return HypothesisReport(bad_zero, best, bound, lip_bad, defects)


# -- linearity classification --------------------------------------------------

@dataclass(frozen=True)
class LinearityVerdict:
    is_linear_in_z: bool
    mu_hat: TimeFunction
    nu_hat: TimeFunction
    max_residual: float


_RESIDUAL_Y = (-2.0, 0.0, 1.5)
_RESIDUAL_Z = (-3.0, -1.0, -0.25, 0.25, 1.0, 3.0)


def classify_linearity(spec: Driver, time_grid: Sequence[float], tol: float = LINEARITY_TOL) -> LinearityVerdict:
    """Split g into ``mu(t)|z| + nu(t) z`` using g(0, +-1, t).

    ``mu_hat = (g(0,1,t) + g(0,-1,t)) / 2`` and ``nu_hat = (g(0,1,t) - g(0,-1,t)) / 2``.
    The residual measures how far g is from that family on a probe grid.
    """
    times = sorted({float(t) for t in time_grid})
    if not times:
        raise ValueError("time grid is empty")
    probe = [(y, z, t) for y in _RESIDUAL_Y for z in (0.0,) for t in times]
    report = validate_hypotheses(spec, probe)
    if report.zero_z_violations:
        raise PreconditionError(f"driver violates g(y,0,t)=0: {report.zero_z_violations[:3]}")

    up = np.array([eval_driver(spec, 0.0, 1.0, t) for t in times])
    down = np.array([eval_driver(spec, 0.0, -1.0, t) for t in times])
    mu = (up + down) / 2
    nu = (up - down) / 2

    resid = 0.0
    for k, t in enumerate(times):
        for y in _RESIDUAL_Y:
            for z in _RESIDUAL_Z:
                r = abs(eval_driver(spec, y, z, t) - mu[k] * abs(z) - nu[k] * z)
                resid = max(resid, r)

    return LinearityVerdict(
        is_linear_in_z=bool(np.max(np.abs(mu)) <= tol),
        mu_hat=TimeFunction(tuple(times), tuple(mu)),
        nu_hat=TimeFunction(tuple(times), tuple(nu)),
        max_residual=float(resid),
    )


# -- literals ----------------------------------------------------------------

def _load_time_function(value, base_dir: Path | None) -> TimeFunction:
    if isinstance(value, TimeFunction):
        return value
    return TimeFunction.from_pairs(value)


def parse_driver(text: str, base_dir: str | Path | None = None) -> Driver:
    """Parse ``zero``, ``linear:<nu>``, ``kappa:<mu>,<nu>`` or ``kappa:@file.json``.

    A sampled file holds either a bare ``[[t, value], ...]`` array (the mu for
    ``kappa``, the nu for ``linear``) or an object with ``"mu"``/``"nu"`` arrays.
    """
    text = text.strip()
    kind, _, arg = text.partition(":")
    kind = kind.lower()
    try:
        if kind == "zero" and not arg:
            return Zero()
        if kind not in ("linear", "kappa"):
            raise ValueError(f"unknown driver kind {kind!r}")
        if arg.startswith("@"):
            path = Path(arg[1:])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            data = json.loads(path.read_text())
            zero = TimeFunction.constant(0.0)
            if isinstance(data, dict):
                mu = _load_time_function(data["mu"], base_dir) if "mu" in data else zero
                nu = _load_time_function(data["nu"], base_dir) if "nu" in data else zero
            elif kind == "kappa":
                mu, nu = TimeFunction.from_pairs(data), zero
            else:
                mu, nu = zero, TimeFunction.from_pairs(data)
            return Linear(nu) if kind == "linear" else KappaIgnorance(mu, nu)
        nums = [float(s) for s in arg.split(",")]
        if kind == "linear" and len(nums) == 1:
            return Linear(TimeFunction.constant(nums[0]))
        if kind == "kappa" and len(nums) in (1, 2):
            nu = nums[1] if len(nums) == 2 else 0.0
            return KappaIgnorance(TimeFunction.constant(nums[0]), TimeFunction.constant(nu))
        raise ValueError(f"wrong number of parameters for {kind!r}")
    except (ValueError, KeyError, TypeError, OSError) as exc:
        raise ValueError(f"malformed driver literal {text!r}: {exc}") from exc
