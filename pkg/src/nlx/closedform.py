"""Analytic reference values: Gaussian expectations of piecewise-linear claims
under a Girsanov drift, and the explicit threshold/window formulas for the
kappa-ignorance driver."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .claim import DECREASING, INCREASING, TerminalClaim
from .driver import TimeFunction
from .errors import DomainError, PreconditionError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianSpec:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError("variance must be positive")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def normal_cdf(x: float) -> float:
    # erfc keeps full relative accuracy in the lower tail
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / _SQRT2)


def _mass_between(a: float, b: float) -> float:
    """P(a <= N(0,1) < b), computed on whichever tail keeps precision."""
    if a >= 0:
        return normal_sf(a) - normal_sf(b)
    return normal_cdf(b) - normal_cdf(a)


def _pdf_or_zero(x: float) -> float:
    return 0.0 if math.isinf(x) else normal_pdf(x)


def gaussian_expectation(f: TerminalClaim, g: GaussianSpec) -> float:
    """E[f(X)] for X ~ N(mean, variance), exact on every linear piece.

    On ``[a, b)`` with ``f = v + s (x - c)``, writing ``x = m + sd u``::

        int (v + s(m - c) + s sd u) phi(u) du
          = (v + s(m - c)) [Phi(beta) - Phi(alpha)] + s sd [phi(alpha) - phi(beta)]
    """
    m, sd = g.mean, g.sd
    b, v, s = f.breakpoints, f.left_values, f.right_slopes
    ends = list(b[1:]) + [math.inf]
    total = 0.0
    for lo, hi, val, slope in zip(b, ends, v, s):
        alpha = (lo - m) / sd
        beta = (hi - m) / sd
        mass = _mass_between(alpha, beta)
        if slope == 0.0:
            total += val * mass
        else:
            level = val + slope * (m - lo)
            total += level * mass + slope * sd * (_pdf_or_zero(alpha) - _pdf_or_zero(beta))
    return total


def girsanov_linear_expectation(f: TerminalClaim, nu: TimeFunction, T: float) -> float:
    """E_g[f(W_T)] for g = nu(t) z, i.e. E[f(N(int_0^T nu, T))]."""
    if not T > 0:
        raise DomainError("T must be positive")
    return gaussian_expectation(f, GaussianSpec(nu.integral(0.0, T), T))


def _window_point(level: float, mu: TimeFunction, T: float, t: float, w_bar: float) -> tuple[float, float]:
    if not 0.0 <= t < T:
        raise DomainError(f"need 0 <= t < T, got t={t!r}, T={T!r}")
    return level - mu.integral(0.0, T) - w_bar, math.sqrt(T - t)


def threshold_claim_solution(mu: TimeFunction, T: float, t: float, w_bar: float) -> tuple[float, float]:
    """(y_t, z_t) for the claim I[W_T >= 1] under g = mu(t)|z|.

    ``w_bar`` is the drift-shifted state ``W_t - int_0^t mu``. With
    ``x = 1 - int_0^T mu - w_bar`` and phi the N(0, T-t) density,
    ``y = P(N(0, T-t) >= x)`` and ``z = phi(x)``. (Equivalently
    ``x = 1 - int_t^T mu - W_t``.)
    """
    x, sd = _window_point(1.0, mu, T, t, w_bar)
    return normal_sf(x / sd), normal_pdf(x / sd) / sd


def window_claim_z(mu: TimeFunction, T: float, t: float, w_bar: float) -> float:
    """z_t for the claim I[1 <= W_T <= 2]: phi(1 - M - w_bar) - phi(2 - M - w_bar), M = int_0^T mu.

    Changes sign at ``w_bar = 3/2 - M``.
    """
    x1, sd = _window_point(1.0, mu, T, t, w_bar)
    x2 = x1 + 1.0
    return (normal_pdf(x1 / sd) - normal_pdf(x2 / sd)) / sd


def monotone_kappa_expectation(f: TerminalClaim, kappa: TimeFunction, T: float) -> float:
    """E_g[f(W_T)] for g = kappa(t)|z| with kappa >= 0 and a monotone claim.

    The worst-case drift is +kappa for increasing claims and -kappa for
    decreasing ones, so the value is a Gaussian expectation with mean
    ``+-int_0^T kappa``. Non-monotone claims are refused.
    """
    if f.monotone_flag not in (INCREASING, DECREASING):
        raise PreconditionError("monotone_kappa_expectation needs a monotone claim")
    if min(kappa.values) < 0:
        raise PreconditionError("kappa must be nonnegative")
    shift = kappa.integral(0.0, T)
    if f.monotone_flag == DECREASING:
        shift = -shift
    return gaussian_expectation(f, GaussianSpec(shift, T))
