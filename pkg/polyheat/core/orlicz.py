#!/usr/bin/env python3
"""
Orlicz Module

Luxemburg norms for the exponential and power Young functions, the inequalities
that tie exp L^2 to the Lebesgue scale, decreasing rearrangements, and the
singular witness functions that separate exp L^2_0 from exp L^2.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Union

import numpy as np

from polyheat.core.exceptions import DomainError, HypothesisViolation
from polyheat.core.grid import GridField, GridSpec, lp_norm, lp_norm_values, sample_radial
from polyheat.core.specfun import log_gamma, sphere_area, unit_ball_volume

logger = logging.getLogger(__name__)

# exp(700) is the last power of e safely inside double range
EXP_ARG_LIMIT = 700.0
LUXEMBURG_RELATIVE_WIDTH = 1e-14
INEQUALITY_SLACK = 1e-9

WITNESSES = ("orlleb_i", "orlleb_ii", "orlleb_iii", "discontinuity")


@dataclass(frozen=True)
class YoungFunction:
    """
    A Young function phi: convex, increasing, phi(0) = 0.

    kind is "expl2" (e^{s^2} - 1), "phi8" (e^{s^2} - 1 - s^2) or "power" (s^p).
    """

    kind: str
    p: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("expl2", "phi8", "power"):
            raise DomainError(f"Unknown Young function kind: {self.kind}")
        if self.kind == "power" and (self.p is None or not self.p >= 1 or math.isinf(self.p)):
            raise DomainError(f"power Young function needs a finite p >= 1, got {self.p}")

    @classmethod
    def exp_l2(cls) -> "YoungFunction":
        return cls("expl2")

    @classmethod
    def phi8(cls) -> "YoungFunction":
        return cls("phi8")

    @classmethod
    def power(cls, p: float) -> "YoungFunction":
        return cls("power", float(p))

    @classmethod
    def from_name(cls, name: str) -> "YoungFunction":
        """Parse 'expl2', 'phi8' or 'power:<p>'."""
        name = name.strip().lower()
        if name.startswith("power"):
            _, _, p = name.partition(":")
            if not p:
                raise DomainError("power Young function needs an exponent, e.g. power:4")
            return cls.power(float(p))
        return cls(name)

    @property
    def label(self) -> str:
        return f"power:{self.p:g}" if self.kind == "power" else self.kind

    def __call__(self, s: np.ndarray) -> np.ndarray:
        """Evaluate phi elementwise; exponential kinds return inf once s^2 > 700."""
        s = np.abs(np.asarray(s, dtype=float))
        if self.kind == "power":
            return s ** self.p
        x = s * s
        out = np.full_like(x, np.inf)
        ok = x <= EXP_ARG_LIMIT
        if self.kind == "expl2":
            out[ok] = np.expm1(x[ok])
            return out
        xo = x[ok]
        small = xo < 0.1
        vals = np.empty_like(xo)
        # series sum_{k>=2} x^k/k! avoids cancellation in expm1(x) - x
        xs = xo[small]
        term = xs * xs / 2.0
        acc = term.copy()
        for k in range(3, 14):
            term = term * xs / k
            acc += term
        vals[small] = acc
        vals[~small] = np.expm1(xo[~small]) - xo[~small]
        out[ok] = vals
        return out


EXP_L2 = YoungFunction.exp_l2()


def orlicz_integral_values(values: np.ndarray, cell_volume: float, phi: YoungFunction, alpha: float) -> float:
    """Discrete modular sum phi(|u_i|/alpha) h^N (inf when a cell overflows)."""
    total = float(np.sum(phi(np.abs(values) / alpha)))
    return total * cell_volume if math.isfinite(total) else math.inf


def orlicz_integral(field: GridField, phi: YoungFunction, alpha: float) -> float:
    """
    Discrete Orlicz modular of a field.

    Args:
        field: The sampled field
        phi: Young function
        alpha: Positive scale

    Returns:
        sum of phi(|u_i| / alpha) h^N
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return orlicz_integral_values(field.values, field.spec.cell_volume, phi, alpha)


def luxemburg_norm_values(values: np.ndarray, cell_volume: float, volume: float,
                          phi: YoungFunction = EXP_L2) -> float:
    """Luxemburg norm of raw samples; see luxemburg_norm."""
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        return 0.0

    def excess(alpha: float) -> bool:
        return orlicz_integral_values(values, cell_volume, phi, alpha) > 1.0

    alpha = peak / math.sqrt(math.log1p(1.0 / volume))
    if excess(alpha):
        lo, hi = alpha, 2.0 * alpha
        while excess(hi):
            lo, hi = hi, 2.0 * hi
    else:
        lo, hi = 0.5 * alpha, alpha
        while not excess(lo):
            lo, hi = 0.5 * lo, lo

    iterations = 0
    while hi - lo > LUXEMBURG_RELATIVE_WIDTH * hi and iterations < 200:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if excess(mid):
            lo = mid
        else:
            hi = mid
        iterations += 1
    logger.debug(f"Luxemburg bisection ({phi.label}) converged after {iterations} steps: {hi:.15g}")
    return hi


def luxemburg_norm(field: GridField, phi: YoungFunction = EXP_L2) -> float:
    """
    Luxemburg norm inf{alpha > 0 : sum phi(|u_i|/alpha) h^N <= 1}.

    The bracket starts at ||u||_inf / sqrt(ln(1 + 1/|box|)), is doubled or
    halved until it encloses the crossing, then bisected. The upper end is
    returned, so the defining inequality holds at the returned value.

    Args:
        field: The sampled field
        phi: Young function (exp L^2 by default)

    Returns:
        The norm, 0 for the zero field
    """
    return luxemburg_norm_values(field.values, field.spec.cell_volume, field.spec.volume, phi)


def exp_l2_norm(field: GridField) -> float:
    return luxemburg_norm(field, EXP_L2)


class InequalityCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return self._asdict()


def _check(lhs: float, rhs: float) -> InequalityCheck:
    return InequalityCheck(float(lhs), float(rhs), bool(lhs <= rhs * (1.0 + INEQUALITY_SLACK)))


def embedding_check(field: GridField, r: float) -> InequalityCheck:
    """Check ||u||_r <= Gamma(r/2 + 1)^(1/r) ||u||_{exp L^2} for r >= 2."""
    if not r >= 2 or math.isinf(r):
        raise DomainError(f"r must satisfy 2 <= r < inf, got {r}")
    lhs = lp_norm(field, r)
    rhs = math.exp(log_gamma(0.5 * r + 1.0) / r) * exp_l2_norm(field)
    return _check(lhs, rhs)


def exp_moment_bound(field: GridField, lam: float, p: float, K: float) -> InequalityCheck:
    """
    Check ||e^{lam u^2} - 1||_p <= (lam p K^2)^(1/p).

    Raises:
        HypothesisViolation: when lam p K^2 > 1 or ||u||_{exp L^2} > K
    """
    if not lam > 0 or not K > 0:
        raise DomainError(f"lambda and K must be positive, got lambda={lam}, K={K}")
    if not p >= 1 or math.isinf(p):
        raise DomainError(f"p must satisfy 1 <= p < inf, got {p}")
    if lam * p * K * K > 1.0 + 1e-12:
        raise HypothesisViolation(f"lambda*p*K^2 = {lam * p * K * K:.6g} exceeds 1")
    norm = exp_l2_norm(field)
    if norm > K * (1.0 + INEQUALITY_SLACK):
        raise HypothesisViolation(f"||u||_expL2 = {norm:.6g} exceeds K = {K:.6g}")
    arg = lam * np.square(field.values)
    if np.any(arg > EXP_ARG_LIMIT):
        raise HypothesisViolation("lambda*u^2 leaves double range; field is not exp L^2 bounded by K")
    lhs = lp_norm_values(np.expm1(arg), field.spec.cell_volume, p)
    rhs = (lam * p * K * K) ** (1.0 / p)
    return _check(lhs, rhs)


def log2_bound(field: GridField) -> InequalityCheck:
    """Check ||u||_{exp L^2} <= (||u||_2 + ||u||_inf) / sqrt(log 2)."""
    lhs = exp_l2_norm(field)
    rhs = (lp_norm(field, 2) + lp_norm(field, math.inf)) / math.sqrt(math.log(2.0))
    return _check(lhs, rhs)


@dataclass(frozen=True)
class SlimEquivalence:
    """The quantities compared by the Phi8 / exp L^2 equivalence."""

    exp_l2: float
    l2: float
    phi8: float

    @property
    def ratio(self) -> float:
        return (self.l2 + self.phi8) / self.exp_l2 if self.exp_l2 > 0 else 0.0


def slim_equivalence(field: GridField) -> SlimEquivalence:
    """Norms entering C1 ||u||_{exp L^2} <= ||u||_2 + ||u||_{L^phi8} <= C2 ||u||_{exp L^2}."""
    return SlimEquivalence(
        exp_l2=exp_l2_norm(field),
        l2=lp_norm(field, 2),
        phi8=luxemburg_norm(field, YoungFunction.phi8()),
    )


def slim_equivalence_constants(fields: Iterable[GridField]) -> tuple:
    """Empirical (C1, C2) over a corpus of nonzero fields."""
    ratios = [slim_equivalence(f).ratio for f in fields if not f.is_zero()]
    if not ratios:
        raise DomainError("corpus contains no nonzero field")
    return min(ratios), max(ratios)


@dataclass(frozen=True, eq=False)
class RearrangementProfile:
    """
    Decreasing rearrangement on measure coordinates r_j = j h^N.

    u_sharp[j-1] is the value on ((j-1) h^N, j h^N]; u_sharpsharp[j-1] is the
    running average of u_sharp over (0, r_j).
    """

    cell_measure: float
    radii: np.ndarray
    u_sharp: np.ndarray
    u_sharpsharp: np.ndarray

    @property
    def total_measure(self) -> float:
        return float(self.radii[-1])

    def sharpsharp_at(self, r: Union[float, np.ndarray]) -> np.ndarray:
        """Exact running average of the piecewise-constant u_sharp at measure r > 0."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("measure coordinate must be positive")
        m = self.cell_measure
        cumulative = np.concatenate(([0.0], np.cumsum(self.u_sharp) * m))
        n = self.u_sharp.size
        k = np.minimum(np.floor(r / m).astype(int), n)
        partial = np.where(k < n, self.u_sharp[np.minimum(k, n - 1)] * (r - k * m), 0.0)
        return (cumulative[k] + partial) / r

    def lp_norm(self, p: float) -> float:
        return lp_norm_values(self.u_sharp, self.cell_measure, p)

    def export_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w") as f:
            f.write("r,u_sharp,u_sharpsharp\n")
            for r, a, b in zip(self.radii, self.u_sharp, self.u_sharpsharp):
                f.write(f"{float(r)!r},{float(a)!r},{float(b)!r}\n")
        return path


def rearrange(field: GridField) -> RearrangementProfile:
    """Decreasing rearrangement u# and its running average u##."""
    m = field.spec.cell_volume
    u_sharp = np.sort(np.abs(field.values).ravel())[::-1].copy()
    j = np.arange(1, u_sharp.size + 1)
    u_sharpsharp = np.cumsum(u_sharp) / j
    return RearrangementProfile(m, j * m, u_sharp, u_sharpsharp)


@dataclass(frozen=True)
class SharpNormBound:
    """sup_{0<r<1} u##(r)/sqrt(log(e/r)) and ||u||_2 compared with ||u||_{exp L^2}."""

    sup_quotient: float
    l2: float
    lux_norm: float
    constant: Optional[float] = None

    @property
    def ratio(self) -> float:
        total = self.sup_quotient + self.l2
        return total / self.lux_norm if self.lux_norm > 0 else 0.0

    @property
    def holds(self) -> bool:
        if self.constant is None:
            return math.isfinite(self.ratio)
        return self.sup_quotient + self.l2 <= self.constant * self.lux_norm * (1.0 + INEQUALITY_SLACK)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sup_quotient": self.sup_quotient,
            "l2": self.l2,
            "lux_norm": self.lux_norm,
            "constant": self.constant,
            "ratio": self.ratio,
            "holds": self.holds,
        }


def sharp_norm_lower_bound(field: GridField, constant: Optional[float] = None) -> SharpNormBound:
    """
    Evaluate the rearrangement lower bound for the exp L^2 norm.

    The supremum over (0, 1) is taken at the cell endpoints below 1 and at the
    limit r = 1, where u## is exact.

    Args:
        field: The sampled field
        constant: Constant C to test sup + ||u||_2 <= C ||u||_{exp L^2} against

    Returns:
        SharpNormBound
    """
    profile = rearrange(field)
    r = profile.radii[profile.radii < 1.0]
    r = np.append(r, 1.0)
    quotient = profile.sharpsharp_at(r) / np.sqrt(1.0 - np.log(r))
    return SharpNormBound(
        sup_quotient=float(quotient.max()),
        l2=lp_norm(field, 2),
        lux_norm=exp_l2_norm(field),
        constant=constant,
    )


def empirical_sharp_constant(fields: Iterable[GridField]) -> float:
    """Smallest C for which the rearrangement bound holds on every field of the corpus."""
    ratios = [sharp_norm_lower_bound(f).ratio for f in fields]
    if not ratios:
        raise DomainError("corpus is empty")
    return max(ratios)


def witness_function(which: str, spec: GridSpec, r: Optional[float] = None) -> GridField:
    """
    Sample one of the singular witness functions (radius clipped at h/2).

    Args:
        which: "orlleb_i"    (-log|x|)^(1/2) on |x| <= 1, in exp L^2 only for alpha > N^(-1/2)
               "orlleb_ii"   (log(1 - log|x|))^(1/2) on |x| <= 1, unbounded but in exp L^2_0
               "orlleb_iii"  |x|^(-N/r) on |x| >= 1, in exp L^2_0 but not in L^r
               "discontinuity"  profile g(w|x|^N), g(s) = (1 - 2 log s)/(2 sqrt(1 - log s)),
                            on 0 < |x| < 1 and w|x|^N < sqrt(e), w the unit-ball volume
        spec: Grid to sample on
        r: Lebesgue exponent in [1, 2) for orlleb_iii

    Returns:
        The sampled witness
    """
    which = which.lower()
    N = spec.dimension
    if which == "orlleb_i":
        def g(rad):
            inside = rad <= 1.0
            return np.where(inside, np.sqrt(np.maximum(-np.log(np.where(inside, rad, 1.0)), 0.0)), 0.0)
    elif which == "orlleb_ii":
        def g(rad):
            inside = rad <= 1.0
            return np.where(inside, np.sqrt(np.log1p(-np.log(np.where(inside, rad, 1.0)))), 0.0)
    elif which == "orlleb_iii":
        if r is None or not 1.0 <= r < 2.0:
            raise DomainError(f"orlleb_iii needs r in [1, 2), got {r}")

        def g(rad):
            return np.where(rad >= 1.0, np.maximum(rad, 1.0) ** (-N / r), 0.0)
    elif which == "discontinuity":
        omega = unit_ball_volume(N)

        def g(rad):
            s = omega * rad ** N
            inside = (rad < 1.0) & (s < math.sqrt(math.e))
            log_s = np.log(np.where(inside, s, 1.0))
            return np.where(inside, (1.0 - 2.0 * log_s) / (2.0 * np.sqrt(1.0 - log_s)), 0.0)
    else:
        raise DomainError(f"Unknown witness '{which}', expected one of {WITNESSES}")
    return sample_radial(spec, g, clip=True)


def discontinuity_window(dimension: int) -> float:
    """Upper end of the measure window on which the discontinuity witness has u##(r) = sqrt(log(e/r))."""
    return min(unit_ball_volume(dimension), math.sqrt(math.e))


def orlleb_iii_modular(alpha: float, r: float, dimension: int, terms: int = 60) -> float:
    """
    Whole-space modular of the orlleb_iii witness by its power series.

    sum_k |S^(N-1)| r / (k! alpha^(2k) N (2k - r)), convergent for r < 2.
    """
    if not 1.0 <= r < 2.0:
        raise DomainError(f"r must lie in [1, 2), got {r}")
    area = sphere_area(dimension)
    total = 0.0
    log_term = 0.0
    for k in range(1, terms + 1):
        log_term += -math.log(k) - 2.0 * math.log(alpha)
        total += math.exp(log_term) * r / (dimension * (2.0 * k - r))
    return area * total


@dataclass
class MembershipScan:
    """Modular of a witness at a fixed alpha across successive grid refinements."""

    which: str
    alpha: float
    resolutions: List[int]
    integrals: List[float]

    @property
    def increments(self) -> List[float]:
        return [b - a for a, b in zip(self.integrals, self.integrals[1:])]

    @property
    def increment_ratios(self) -> List[float]:
        inc = self.increments
        return [b / a if a != 0 else math.inf for a, b in zip(inc, inc[1:])]

    @property
    def diverges(self) -> bool:
        """Divergent when an integral overflows or the last increment ratio is >= 1."""
        if any(math.isinf(v) for v in self.integrals):
            return True
        ratios = self.increment_ratios
        return bool(ratios) and abs(ratios[-1]) >= 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "which": self.which,
            "alpha": self.alpha,
            "resolutions": self.resolutions,
            "integrals": self.integrals,
            "increment_ratios": self.increment_ratios,
            "diverges": self.diverges,
        }


def membership_scan(which: str, alpha: float, dimension: int = 1, box_length: float = 4.0,
                    resolutions: Sequence[int] = (256, 512, 1024, 2048, 4096),
                    r: Optional[float] = None) -> MembershipScan:
    """
    Refinement-divergence diagnostic for exp L^2_0 membership.

    On a finite grid every modular is finite, so membership at scale alpha is
    read off from how the modular behaves as the grid is refined: increments
    that shrink geometrically mean the continuum integral is finite.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if len(resolutions) < 3:
        raise DomainError("membership_scan needs at least three resolutions")
    integrals = []
    for n in resolutions:
        spec = GridSpec(dimension, n, box_length)
        integrals.append(orlicz_integral(witness_function(which, spec, r), EXP_L2, alpha))
    scan = MembershipScan(which, alpha, list(resolutions), integrals)
    logger.info(f"Membership scan {which} alpha={alpha:g}: ratios {scan.increment_ratios}")
    return scan
