"""Terminal claims xi = f(W_T) as bounded piecewise-linear functions with jumps.

Pieces are right-continuous: piece ``k`` covers ``[b_k, b_{k+1})`` and takes the
value ``v_k + s_k (x - b_k)`` there. The first breakpoint is always ``-inf``
(a flat left tail) and the last piece has zero slope, so every claim is bounded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

INCREASING = "increasing"
DECREASING = "decreasing"
NONE = "none"

_MONO_TOL = 1e-12
DEFAULT_LOGISTIC_KNOTS = 201
LOGISTIC_SPAN = 10.0


class Interval(NamedTuple):
    """Half-open interval ``[lo, hi)``; ``lo`` may be -inf and ``hi`` may be +inf."""

    lo: float
    hi: float


@dataclass(frozen=True, eq=False, init=False)
class TerminalClaim:
    breakpoints: np.ndarray
    left_values: np.ndarray
    right_slopes: np.ndarray
    monotone_flag: str = field(default=NONE)
    label: str = field(default="custom")

    def __init__(self, breakpoints, left_values, right_slopes, monotone_flag=None, label="custom"):
        b = np.array([-np.inf if v is None else v for v in breakpoints], dtype=float)
        v = np.asarray(left_values, dtype=float).copy()
        s = np.asarray(right_slopes, dtype=float).copy()
        if not (b.ndim == v.ndim == s.ndim == 1 and len(b) == len(v) == len(s) and len(b) > 0):
            raise ValueError("breakpoints, left_values and right_slopes must be equal-length 1-d")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.isposinf(b).any() or np.isneginf(b[1:]).any():
            raise ValueError("only the first breakpoint may be -inf")
        if not (np.isfinite(v).all() and np.isfinite(s).all()):
            raise ValueError("values and slopes must be finite")
        if s[-1] != 0.0:
            raise ValueError("the right tail must have zero slope (claims are bounded)")
        if np.isfinite(b[0]):
            b = np.concatenate([[-np.inf], b])
            v = np.concatenate([[v[0]], v])
            s = np.concatenate([[0.0], s])
        elif s[0] != 0.0:
            raise ValueError("the left tail must have zero slope (claims are bounded)")
        for arr in (b, v, s):
            arr.flags.writeable = False
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "left_values", v)
        object.__setattr__(self, "right_slopes", s)
        object.__setattr__(self, "label", label)
        detected = self._detect_monotone()
        if monotone_flag is None:
            monotone_flag = detected
        elif monotone_flag != NONE and monotone_flag != detected and not self.is_constant:
            raise ValueError(f"declared monotone_flag {monotone_flag!r} contradicts the pieces")
        object.__setattr__(self, "monotone_flag", monotone_flag)

    # -- structure --

    @property
    def finite_breakpoints(self) -> np.ndarray:
        return self.breakpoints[1:]

    def _right_ends(self) -> np.ndarray:
        """Left limits at each following breakpoint (the value where each piece ends)."""
        b, v, s = self.breakpoints, self.left_values, self.right_slopes
        if len(b) == 1:
            return np.array([])
        width = np.diff(b)
        width[0] = 0.0  # the -inf piece is flat
        return v[:-1] + s[:-1] * width

    def jumps(self) -> np.ndarray:
        return self.left_values[1:] - self._right_ends()

    @property
    def bounds(self) -> tuple[float, float]:
        vals = np.concatenate([self.left_values, self._right_ends()])
        return float(vals.min()), float(vals.max())

    @property
    def f_min(self) -> float:
        return self.bounds[0]

    @property
    def f_max(self) -> float:
        return self.bounds[1]

    @property
    def is_constant(self) -> bool:
        lo, hi = self.bounds
        return lo == hi

    def active_region(self) -> tuple[float, float] | None:
        """Smallest interval outside which the claim is constant."""
        fb = self.finite_breakpoints
        return None if len(fb) == 0 else (float(fb[0]), float(fb[-1]))

    def _detect_monotone(self) -> str:
        s, j = self.right_slopes, self.jumps()
        if np.all(s >= 0) and np.all(j >= -_MONO_TOL):
            return INCREASING
        if np.all(s <= 0) and np.all(j <= _MONO_TOL):
            return DECREASING
        return NONE

    # -- evaluation --

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        base = self.breakpoints[idx]
        offset = np.where(np.isfinite(base), x - np.where(np.isfinite(base), base, 0.0), 0.0)
        out = self.left_values[idx] + self.right_slopes[idx] * offset
        return float(out) if out.ndim == 0 else out

    def slope_at(self, x: float) -> float:
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        return float(self.right_slopes[idx])

    # -- arithmetic --

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return TerminalClaim(self.breakpoints, self.left_values + other, self.right_slopes,
                                 label=f"({self.label})+{other!r}")
        if not isinstance(other, TerminalClaim):
            return NotImplemented
        b = np.union1d(self.breakpoints, other.breakpoints)
        v = self(b[1:])
        v = np.concatenate([[self.left_values[0] + other.left_values[0]], v + other(b[1:])])
        s = np.array([self.slope_at(x) + other.slope_at(x) for x in b])
        return TerminalClaim(b, v, s, label=f"({self.label})+({other.label})")

    __radd__ = __add__

    def __mul__(self, c):
        if not isinstance(c, (int, float)):
            return NotImplemented
        return TerminalClaim(self.breakpoints, c * self.left_values, c * self.right_slopes,
                             label=f"{c!r}*({self.label})")

    __rmul__ = __mul__

    def __neg__(self):
        return TerminalClaim(self.breakpoints, -self.left_values, -self.right_slopes,
                             label=f"-({self.label})")

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def shifted(self, a: float) -> TerminalClaim:
        """The claim ``x -> f(x + a)``."""
        return TerminalClaim(self.breakpoints - a, self.left_values, self.right_slopes,
                             label=f"shift({self.label},{a!r})")

    def __repr__(self):
        return f"TerminalClaim({self.label!r}, pieces={len(self.breakpoints)}, flag={self.monotone_flag})"

    def to_json(self) -> dict:
        return {
            "breakpoints": [None if not math.isfinite(b) else float(b) for b in self.breakpoints],
            "left_values": self.left_values.tolist(),
            "right_slopes": self.right_slopes.tolist(),
        }


# -- builtins ------------------------------------------------------------------

def constant(c: float) -> TerminalClaim:
    return TerminalClaim([None], [c], [0.0], label=f"const:{c!r}")


def threshold(a: float) -> TerminalClaim:
    """I[x >= a]."""
    return TerminalClaim([None, a], [0.0, 1.0], [0.0, 0.0], label=f"threshold:{a!r}")


def indicator(a: float, b: float) -> TerminalClaim:
    """I[a <= x <= b], right-continuous at b."""
    if not a < b:
        raise ValueError("indicator needs a < b")
    return TerminalClaim([None, a, b], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0], label=f"indicator:{a!r},{b!r}")


def interval_indicator(intervals: Sequence[Interval]) -> TerminalClaim:
    """Indicator of a disjoint, sorted union of half-open intervals."""
    bps, vals = [None], [0.0]
    for lo, hi in intervals:
        if math.isinf(lo):
            vals[0] = 1.0
        else:
            bps.append(lo)
            vals.append(1.0)
        if math.isfinite(hi):
            bps.append(hi)
            vals.append(0.0)
    return TerminalClaim(bps, vals, [0.0] * len(bps), label=format_intervals(intervals))


def identity(cap: float) -> TerminalClaim:
    """x clamped to [-cap, cap]."""
    if not cap > 0:
        raise ValueError("identity cap must be positive")
    return TerminalClaim([None, -cap, cap], [-cap, -cap, cap], [0.0, 1.0, 0.0], label=f"identity:{cap!r}")


def logistic(k: float, knots: int = DEFAULT_LOGISTIC_KNOTS) -> TerminalClaim:
    """Piecewise-linear interpolant of 1/(1+exp(-kx)) on ``knots`` points over [-10/|k|, 10/|k|]."""
    if k == 0 or knots < 2:
        raise ValueError("logistic needs k != 0 and at least 2 knots")
    span = LOGISTIC_SPAN / abs(k)
    xs = np.linspace(-span, span, knots)
    ys = 0.5 * (1.0 + np.tanh(0.5 * k * xs))
    slopes = np.append(np.diff(ys) / np.diff(xs), 0.0)
    suffix = "" if knots == DEFAULT_LOGISTIC_KNOTS else f",{knots}"
    return TerminalClaim(xs, ys, slopes, label=f"logistic:{k!r}{suffix}")


def parse_claim(text: str, base_dir: str | Path | None = None) -> TerminalClaim:
    """Parse a claim literal (``threshold:a``, ``indicator:a,b``, ``identity:cap``,
    ``logistic:k[,knots]``, ``const:c``) or ``@file.json`` with piece arrays."""
    text = text.strip()
    try:
        if text.startswith("@"):
            path = Path(text[1:])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            data = json.loads(path.read_text())
            return TerminalClaim(data["breakpoints"], data["left_values"], data["right_slopes"],
                                 label=text)
        kind, _, arg = text.partition(":")
        nums = [float(a) for a in arg.split(",")] if arg else []
        builders = {
            "threshold": (threshold, (1,)),
            "indicator": (indicator, (2,)),
            "identity": (identity, (1,)),
            "const": (constant, (1,)),
            "logistic": (lambda k, n=DEFAULT_LOGISTIC_KNOTS: logistic(k, int(n)), (1, 2)),
        }
        if kind not in builders:
            raise ValueError(f"unknown claim kind {kind!r}")
        fn, arities = builders[kind]
        if len(nums) not in arities:
            raise ValueError(f"wrong number of parameters for {kind!r}")
        claim = fn(*nums)
        object.__setattr__(claim, "label", text)
        return claim
    except (ValueError, KeyError, TypeError, OSError) as exc:
        raise ValueError(f"malformed claim literal {text!r}: {exc}") from exc


def eval_claim(f: TerminalClaim, x: float) -> float:
    return float(f(x))


# -- level sets and comonotonicity ---------------------------------------------

def _merge(intervals: list[Interval]) -> list[Interval]:
    out: list[Interval] = []
    for iv in sorted(intervals):
        if out and iv.lo <= out[-1].hi:
            out[-1] = Interval(out[-1].lo, max(out[-1].hi, iv.hi))
        else:
            out.append(iv)
    return out


def superlevel_set(f: TerminalClaim, s: float) -> list[Interval]:
    """``{x : f(x) >= s}`` as sorted, disjoint half-open intervals.

    Isolated points (a decreasing piece touching ``s`` exactly at its start)
    carry no Gaussian mass and are dropped.
    """
    b, v, sl = f.breakpoints, f.left_values, f.right_slopes
    ends = np.append(b[1:], np.inf)
    pieces = []
    for lo, hi, val, slope in zip(b, ends, v, sl):
        if slope == 0.0:
            if val >= s:
                pieces.append(Interval(lo, hi))
            continue
        with np.errstate(over="ignore"):  # a subnormal slope sends the root to +-inf, which is right
            root = lo + (s - val) / slope
        if slope > 0:
            start = max(lo, root)
            if start < hi:
                pieces.append(Interval(start, hi))
        else:
            stop = min(hi, root)
            if stop > lo:
                pieces.append(Interval(lo, stop))
    return _merge(pieces)


def format_intervals(intervals: Sequence[Interval]) -> str:
    if not intervals:
        return "empty"
    return ";".join(f"{lo!r},{hi!r}" for lo, hi in intervals)


def parse_intervals(text: str) -> list[Interval]:
    """Parse ``"lo,hi;lo,hi"`` (``inf``/``-inf`` allowed) or ``empty``."""
    text = text.strip()
    if text in ("", "empty"):
        return []
    out = []
    for part in text.split(";"):
        lo, hi = (float(p) for p in part.split(","))
        out.append(Interval(lo, hi))
    return out


@dataclass(frozen=True)
class ComonotonicResult:
    comonotonic: bool
    witness: tuple[float, float] | None = None

    def __bool__(self):
        return self.comonotonic


def probe_points(f: TerminalClaim, h: TerminalClaim, n: int) -> np.ndarray:
    fb = np.union1d(f.finite_breakpoints, h.finite_breakpoints)
    lo, hi = (float(fb[0]) - 1.0, float(fb[-1]) + 1.0) if len(fb) else (-1.0, 1.0)
    pts = np.union1d(fb, np.linspace(lo, hi, n))
    # midpoints expose behaviour just left of each jump
    return np.union1d(pts, 0.5 * (pts[1:] + pts[:-1]))


def comonotonic_check(f: TerminalClaim, h: TerminalClaim, probe_points_count: int = 200,
                      tol: float = 1e-12) -> ComonotonicResult:
    """All-pairs test of (f(x)-f(x'))(h(x)-h(x')) >= 0 on breakpoints plus a probe grid.

    ``tol`` absorbs rounding in piecewise-linear interpolation between knots.
    """
    if probe_points_count < 2:
        raise ValueError("probe_points must be >= 2")
    x = probe_points(f, h, probe_points_count)
    fx, hx = f(x), h(x)
    prod = (fx[:, None] - fx[None, :]) * (hx[:, None] - hx[None, :])
    bad = np.argwhere(prod < -tol)
    if len(bad):
        i, j = bad[0]
        return ComonotonicResult(False, (float(x[i]), float(x[j])))
    return ComonotonicResult(True)
