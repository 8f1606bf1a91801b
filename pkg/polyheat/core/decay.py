#!/usr/bin/env python3
"""
Decay Module

Decay exponents of small-data solutions, their admissible Lebesgue range,
log-log regression of trajectory norms, and the logarithmic inequality used
to close the global estimates.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats

from polyheat.core.exceptions import DomainError, InsufficientSamplesError, RegimeViolation
from polyheat.core.grid import GridField, lp_norm
from polyheat.core.semigroup import apply_many, smoothing_exponent

if TYPE_CHECKING:
    from polyheat.core.solver import Trajectory

logger = logging.getLogger(__name__)

MIN_FIT_SAMPLES = 8
LOG_ROOT_BRACKET = (2.0, 3.0)


def sigma_theory(m: float, N: int, p: float, d: int) -> float:
    """1/(m-1) - N/(2dp), with N/(2dp) = 0 at p = inf."""
    if not m > 1:
        raise DomainError(f"m must be > 1, got {m}")
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if d < 1 or N < 1:
        raise DomainError(f"need N >= 1 and d >= 1, got N={N}, d={d}")
    tail = 0.0 if math.isinf(p) else N / (2.0 * d * p)
    return 1.0 / (m - 1.0) - tail


def linear_decay_rate(N: int, d: int, p: float, q: float = math.inf) -> float:
    """Rate N/(2d)(1/p - 1/q) of the linear semigroup from L^p into L^q."""
    return smoothing_exponent(N, d, p, q)


@dataclass(frozen=True)
class AdmissibleRange:
    """Lebesgue exponents p for which the global small-data theory applies."""

    lower: float
    upper: float
    lower_closed: bool
    upper_closed: bool
    branch: str

    def contains(self, p: float) -> bool:
        above = p >= self.lower if self.lower_closed else p > self.lower
        below = p <= self.upper if self.upper_closed else p < self.upper
        return above and below

    def pick(self) -> float:
        """Smallest admissible p (twice the open lower end otherwise)."""
        return self.lower if self.lower_closed else 2.0 * self.lower

    @property
    def description(self) -> str:
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        return f"{left}{self.lower:g}, {self.upper:g}{right}, branch {self.branch}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lower": self.lower,
            "upper": "inf" if math.isinf(self.upper) else self.upper,
            "lower_closed": self.lower_closed,
            "upper_closed": self.upper_closed,
            "branch": self.branch,
        }


def admissible_p_range(m: float, N: int, d: int) -> AdmissibleRange:
    """
    Admissible p for the decay estimate.

    N < 4d:  max{m, 2N(m-1)/(4d-N)} <= p <= inf
    N >= 4d: N(m-1)/(2d) < p < inf

    Raises:
        RegimeViolation: m < 2 or N(m-1)/(2d) < 2
    """
    if m < 2:
        raise RegimeViolation(f"m = {m:g} violates m >= 2")
    scaled = N * (m - 1.0) / (2.0 * d)
    if scaled < 2:
        raise RegimeViolation(f"N(m-1)/(2d) = {scaled:g} violates N(m-1)/(2d) >= 2")
    if N < 4 * d:
        lower = max(m, 2.0 * N * (m - 1.0) / (4.0 * d - N))
        return AdmissibleRange(lower, math.inf, True, True, "N < 4d")
    return AdmissibleRange(scaled, math.inf, False, False, "N >= 4d")


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float


def fit_power_law(t: Sequence[float], y: Sequence[float]) -> PowerLawFit:
    """Least-squares line through (log t, log y)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 2 or t.size != y.size:
        raise InsufficientSamplesError(f"need matching samples, got {t.size} and {y.size}")
    if np.any(t <= 0) or np.any(y <= 0):
        raise DomainError("power-law fit needs positive times and values")
    result = stats.linregress(np.log(t), np.log(y))
    return PowerLawFit(float(result.slope), float(result.intercept), float(result.rvalue ** 2))


@dataclass(frozen=True)
class DecayFit:
    """Fitted decay exponent of ||u(t)||_p over a time window."""

    p: float
    sigma_hat: float
    sigma_theory: Optional[float]
    window: Tuple[float, float]
    r_squared: float
    samples: int
    m: Optional[float] = None
    N: Optional[int] = None
    d: Optional[int] = None

    def passes(self, tolerance: float = 0.03) -> bool:
        """One-sided check sigma_hat >= sigma_theory - tolerance."""
        if self.sigma_theory is None:
            raise DomainError("no theoretical exponent for a source-free trajectory")
        return self.sigma_hat >= self.sigma_theory - tolerance

    CSV_HEADER = "m,N,d,p,sigma_theory,sigma_hat,r_squared,window_lo,window_hi"

    def csv_row(self) -> str:
        values = [self.m, self.N, self.d, self.p, self.sigma_theory, self.sigma_hat,
                  self.r_squared, self.window[0], self.window[1]]
        return ",".join("" if v is None else repr(float(v)) if isinstance(v, float) else str(v) for v in values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "N": self.N,
            "d": self.d,
            "p": "inf" if math.isinf(self.p) else self.p,
            "sigma_theory": self.sigma_theory,
            "sigma_hat": self.sigma_hat,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "samples": self.samples,
        }


def default_window(traj: "Trajectory") -> Tuple[float, float]:
    """
    [10 l0^{2d}, min(T, (L/16)^{2d})], l0 = (||u0||_1 / ||u0||_inf)^{1/N} / 2 the datum half-width.
    """
    u0 = traj.fields[0]
    N, d = u0.spec.dimension, traj.d
    peak = lp_norm(u0, math.inf)
    if peak == 0:
        raise DomainError("zero initial datum has no decay window")
    half_width = 0.5 * (lp_norm(u0, 1) / peak) ** (1.0 / N)
    lo = 10.0 * half_width ** (2 * d)
    hi = min(float(traj.times[-1]), (u0.spec.box_length / 16.0) ** (2 * d))
    if not lo < hi:
        raise DomainError(f"default decay window is empty: [{lo:g}, {hi:g}]; extend T or enlarge the box")
    return lo, hi


def fit_decay(traj: "Trajectory", p: float, window: Optional[Tuple[float, float]] = None,
              subtract_mean: bool = False) -> DecayFit:
    """
    Fit ||u(t)||_p ~ C t^{-sigma} over a window of the trajectory.

    Args:
        traj: Trajectory tracking p
        p: Lebesgue exponent
        window: (t_min, t_max); defaults to default_window(traj)
        subtract_mean: Fit the norm of u - mean(u) instead (periodic mass floor)

    Returns:
        DecayFit with sigma_hat the negated slope

    Raises:
        InsufficientSamplesError: fewer than 8 samples in the window
        DomainError: zero norms in the window
    """
    lo, hi = window if window is not None else default_window(traj)
    times = traj.times
    if not (0 < lo < hi) or lo > times[-1] or hi < times[1]:
        raise DomainError(f"window ({lo:g}, {hi:g}) is outside the trajectory support")
    inside = (times >= lo) & (times <= hi)
    if np.count_nonzero(inside) < MIN_FIT_SAMPLES:
        raise InsufficientSamplesError(
            f"{np.count_nonzero(inside)} samples in window ({lo:g}, {hi:g}), need {MIN_FIT_SAMPLES}"
        )
    if subtract_mean:
        norms = np.array([lp_norm(f.with_values(f.values - f.values.mean()), p)
                          for f, keep in zip(traj.fields, inside) if keep])
    else:
        norms = traj.norm(p)[inside]
    if np.any(norms <= 0):
        raise DomainError("zero norm inside the decay window")
    fit = fit_power_law(times[inside], norms)

    spec = traj.fields[0].spec
    nonlinearity = traj.nonlinearity
    theory = None
    if not nonlinearity.is_zero and nonlinearity.m > 1:
        theory = sigma_theory(nonlinearity.m, spec.dimension, p, traj.d)
    result = DecayFit(
        p=float(p), sigma_hat=-fit.slope, sigma_theory=theory, window=(float(lo), float(hi)),
        r_squared=fit.r_squared, samples=int(np.count_nonzero(inside)),
        m=nonlinearity.m, N=spec.dimension, d=traj.d,
    )
    logger.info(f"Decay fit p={p:g}: sigma_hat={result.sigma_hat:.5f} (theory {theory}), r2={fit.r_squared:.4f}")
    return result


@dataclass(frozen=True)
class LinearExponentFit:
    p: float
    q: float
    fitted: float
    theory: float
    r_squared: float

    @property
    def relative_error(self) -> float:
        return abs(self.fitted - self.theory) / self.theory


def linear_smoothing_exponent(phi: GridField, d: int, p: float, q: float,
                              times: Sequence[float]) -> LinearExponentFit:
    """
    Decay exponent of ||S(t) phi||_q / ||S(t) phi||_p, expected N/(2d)(1/p - 1/q).
    """
    if not 1 <= p < q:
        raise DomainError(f"need 1 <= p < q, got p={p}, q={q}")
    times = np.asarray(times, dtype=float)
    evolved = apply_many(phi, times, d)
    ratio = np.array([lp_norm(f, q) / lp_norm(f, p) for f in evolved])
    fit = fit_power_law(times, ratio)
    theory = linear_decay_rate(phi.spec.dimension, d, p, q)
    return LinearExponentFit(float(p), float(q), -fit.slope, theory, fit.r_squared)


def log_root() -> float:
    """The root a of a = 2 log(a + 1) in (2, 3), by bisection to machine width."""
    return float(optimize.bisect(lambda a: a - 2.0 * math.log1p(a), *LOG_ROOT_BRACKET,
                                 xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))


@dataclass(frozen=True)
class LogCertificate:
    a_root: float
    threshold: float
    holds_all: bool
    worst_ratio: float
    samples: int


def log_inequality_certificate(N: int, d: int, taus: Iterable[float]) -> LogCertificate:
    """
    Check (log(tau^{-N/(2d)} + 1))^{-1/2} <= sqrt(2) tau^{N/(4d)} for tau >= a^{-2d/N}.

    Raises:
        DomainError: a sample lies below the threshold a^{-2d/N}
    """
    a = log_root()
    threshold = a ** (-2.0 * d / N)
    taus = np.asarray(list(taus), dtype=float)
    if taus.size == 0:
        raise DomainError("no tau samples")
    if np.any(taus < threshold * (1.0 - 1e-15)):
        raise DomainError(f"tau must be >= a^(-2d/N) = {threshold:.15g}, got min {taus.min():.15g}")
    x = taus ** (-N / (2.0 * d))
    lhs = np.log1p(x) ** -0.5
    rhs = math.sqrt(2.0) * taus ** (N / (4.0 * d))
    ratio = lhs / rhs
    worst = float(ratio.max())
    return LogCertificate(a, threshold, bool(np.all(ratio <= 1.0 + 1e-12)), worst, int(taus.size))
