#!/usr/bin/env python3
"""
Special Functions Module

Gamma, log-Gamma and Beta evaluation, independent quadrature oracles for the
defining integrals, and the Stirling-type bounds used by the Orlicz estimates.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Tuple, Union

import numpy as np
from scipy import integrate, special

from polyheat.core.exceptions import DomainError, QuadratureError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class SpecFunConfig:
    """Accuracy settings for the quadrature oracles."""

    relative_tolerance: float = 1e-12
    max_quadrature_nodes: int = 200

    def __post_init__(self):
        if not self.relative_tolerance > 0:
            raise DomainError(f"relative_tolerance must be positive, got {self.relative_tolerance}")
        if self.max_quadrature_nodes < 1:
            raise DomainError(f"max_quadrature_nodes must be >= 1, got {self.max_quadrature_nodes}")


DEFAULT_CONFIG = SpecFunConfig()


def _positive(name: str, x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be positive and finite, got {x!r}")
    return arr


def gamma(x: ArrayLike) -> ArrayLike:
    """
    Evaluate the Gamma function on the positive half-line.

    Args:
        x: Positive real (scalar or array)

    Returns:
        Gamma(x), same shape as the input
    """
    arr = _positive("x", x)
    result = special.gamma(arr)
    return float(result) if np.ndim(result) == 0 else result


def log_gamma(x: ArrayLike) -> ArrayLike:
    """Natural logarithm of Gamma(x) for x > 0."""
    arr = _positive("x", x)
    result = special.gammaln(arr)
    return float(result) if np.ndim(result) == 0 else result


def beta(x: float, y: float) -> float:
    """
    Evaluate B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y) through log-Gamma.

    The arguments are sorted before evaluation so beta(x, y) and beta(y, x)
    run the exact same floating-point operations.

    Args:
        x: First positive argument
        y: Second positive argument

    Returns:
        The Beta function value
    """
    _positive("x", x)
    _positive("y", y)
    a, b = sorted((float(x), float(y)))
    return math.exp(special.gammaln(a) + special.gammaln(b) - special.gammaln(a + b))


def gamma_by_quadrature(x: float, config: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """Gamma(x) by adaptive quadrature of its defining integral."""
    _positive("x", x)
    tol = config.relative_tolerance
    # algebraic endpoint weight handles tau^(x-1) near 0
    head, err_head = integrate.quad(
        lambda tau: math.exp(-tau), 0.0, 1.0,
        weight="alg", wvar=(x - 1.0, 0.0),
        epsabs=0.0, epsrel=tol, limit=config.max_quadrature_nodes,
    )
    tail, err_tail = integrate.quad(
        lambda tau: tau ** (x - 1.0) * math.exp(-tau), 1.0, np.inf,
        epsabs=0.0, epsrel=tol, limit=config.max_quadrature_nodes,
    )
    value = head + tail
    error = err_head + err_tail
    if error > 1e4 * tol * abs(value):
        raise QuadratureError(f"Gamma quadrature did not converge for x={x}", error)
    return value


def beta_by_quadrature(x: float, y: float, config: SpecFunConfig = DEFAULT_CONFIG) -> float:
    """B(x, y) by quadrature of the integral of t^(x-1) (1-t)^(y-1) over (0, 1)."""
    _positive("x", x)
    _positive("y", y)
    value, error = integrate.quad(
        lambda t: 1.0, 0.0, 1.0,
        weight="alg", wvar=(x - 1.0, y - 1.0),
        epsabs=0.0, epsrel=config.relative_tolerance, limit=config.max_quadrature_nodes,
    )
    if error > 1e4 * config.relative_tolerance * abs(value):
        raise QuadratureError(f"Beta quadrature did not converge for ({x}, {y})", error)
    return value


def unit_ball_volume(dimension: int) -> float:
    """Volume of the unit ball in R^N."""
    if dimension < 1:
        raise DomainError(f"dimension must be >= 1, got {dimension}")
    return math.exp(0.5 * dimension * math.log(math.pi) - special.gammaln(0.5 * dimension + 1.0))


def sphere_area(dimension: int) -> float:
    """Surface measure of the unit sphere S^(N-1)."""
    if dimension < 1:
        raise DomainError(f"dimension must be >= 1, got {dimension}")
    return 2.0 * math.exp(0.5 * dimension * math.log(math.pi) - special.gammaln(0.5 * dimension))


@dataclass
class GammaBoundsReport:
    """Per-sample Stirling ratios and the smallest admissible constant."""

    samples: List[float]
    stirling_ratios: List[float]
    bound_ratios: List[float] = field(repr=False)
    constant: float
    monotone_trend: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "samples": self.samples,
            "stirling_ratios": self.stirling_ratios,
            "constant": self.constant,
            "monotone_trend": self.monotone_trend,
        }


def check_gamma_bounds(x_samples: Iterable[float]) -> GammaBoundsReport:
    """
    Check Stirling's asymptotic and the bound Gamma(x+1) <= C x^(x+1/2).

    Args:
        x_samples: Sample points, all >= 1

    Returns:
        GammaBoundsReport with the ratio Gamma(x+1) / ((x/e)^x sqrt(2 pi x)) per
        sample, the smallest C valid on the sample set, and whether the ratios
        decrease toward 1 as x grows
    """
    samples = [float(x) for x in x_samples]
    if not samples:
        raise DomainError("x_samples must not be empty")
    if any(x < 1 for x in samples):
        raise DomainError(f"all samples must be >= 1, got min {min(samples)}")

    xs = np.asarray(samples)
    lg = special.gammaln(xs + 1.0)
    stirling = np.exp(lg - (xs * np.log(xs) - xs + 0.5 * np.log(2.0 * math.pi * xs)))
    bound = np.exp(lg - (xs + 0.5) * np.log(xs))

    order = np.argsort(xs)
    ordered = stirling[order]
    monotone = bool(np.all(np.diff(ordered) <= 1e-12) and np.all(ordered >= 1.0 - 1e-12))
    logger.debug(f"Stirling ratios over [{xs.min()}, {xs.max()}]: {ordered[0]:.6g} .. {ordered[-1]:.6g}")

    return GammaBoundsReport(
        samples=samples,
        stirling_ratios=stirling.tolist(),
        bound_ratios=bound.tolist(),
        constant=float(bound.max()),
        monotone_trend=monotone,
    )


def gamma_lower_bound(x_samples: Iterable[float]) -> Tuple[float, float]:
    """Return (min Gamma(x), argmin) over the positive samples."""
    xs = _positive("x_samples", np.asarray(list(x_samples), dtype=float))
    values = special.gamma(xs)
    i = int(np.argmin(values))
    return float(values[i]), float(xs[i])
