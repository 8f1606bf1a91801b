#!/usr/bin/env python3
"""
Semigroup Module

Spectral application of exp(-t (-Delta)^d) on periodic grids and numerical
verification of the L^p-L^q and Orlicz smoothing estimates it satisfies.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft, integrate

from polyheat.core.exceptions import DomainError, GridError, QuadratureError
from polyheat.core.grid import GridField, GridSpec, lp_norm
from polyheat.core.orlicz import INEQUALITY_SLACK, InequalityCheck, exp_l2_norm

logger = logging.getLogger(__name__)

STANDARD_EXPONENTS = (1.0, 2.0, 4.0, math.inf)


def _inv(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


def smoothing_exponent(N: int, d: int, p: float, q: float) -> float:
    """N/(2d) (1/p - 1/q), the L^p-L^q rate of the semigroup."""
    return N / (2.0 * d) * (_inv(p) - _inv(q))


@dataclass(frozen=True, eq=False)
class SemigroupOp:
    """exp(-t (-Delta)^d) on a periodic grid, applied through its DFT symbol."""

    d: int
    t: float
    spec: GridSpec

    def __post_init__(self):
        if self.d < 1:
            raise DomainError(f"order d must be >= 1, got {self.d}")
        if not (self.t >= 0 and math.isfinite(self.t)):
            raise DomainError(f"t must be finite and nonnegative, got {self.t}")

    @cached_property
    def symbol(self) -> np.ndarray:
        """exp(-t |xi|^{2d}) on the rfftn half-spectrum."""
        return np.exp(-self.t * self.spec.frequency_squared(real=True) ** self.d)

    def apply(self, field: GridField) -> GridField:
        """
        Apply the semigroup to a field on the operator's grid.

        Returns the input object itself at t = 0.
        """
        if field.spec != self.spec:
            raise GridError(f"field grid {field.spec} does not match operator grid {self.spec}")
        if self.t == 0:
            return field
        shape = self.spec.shape
        spectrum = fft.rfftn(field.values)
        return GridField(self.spec, fft.irfftn(spectrum * self.symbol, s=shape))

    __call__ = apply


def apply_many(field: GridField, times: Sequence[float], d: int) -> List[GridField]:
    """exp(-t (-Delta)^d) field for several times, reusing one forward transform."""
    spec = field.spec
    k2d = spec.frequency_squared(real=True) ** d
    spectrum = fft.rfftn(field.values)
    out = []
    for t in times:
        if t < 0:
            raise DomainError(f"times must be nonnegative, got {t}")
        if t == 0:
            out.append(field)
        else:
            out.append(GridField(spec, fft.irfftn(spectrum * np.exp(-t * k2d), s=spec.shape)))
    return out


def smoothing_ratio(field: GridField, t: float, p: float, q: float, d: int) -> float:
    """
    Empirical smoothing constant for one instance.

    Returns:
        ||S(t) u||_q / (t^{-N/(2d)(1/p - 1/q)} ||u||_p), 0 for the zero field
    """
    if not 1 <= p <= q:
        raise DomainError(f"need 1 <= p <= q, got p={p}, q={q}")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    denominator = t ** (-smoothing_exponent(field.spec.dimension, d, p, q)) * lp_norm(field, p)
    if denominator == 0:
        return 0.0
    evolved = SemigroupOp(d, t, field.spec).apply(field)
    return lp_norm(evolved, q) / denominator


@dataclass
class SmoothingConstant:
    """Largest smoothing ratio observed over a sweep; reused as H by the inequality checks."""

    N: int
    d: int
    value: float
    samples: List[Tuple[float, float, float, float]] = field(default_factory=list)
    p_equals_q: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "d": self.d,
            "value": self.value,
            "p_equals_q": self.p_equals_q,
            "sample_count": len(self.samples),
        }

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SmoothingConstant":
        path = Path(path)
        if not path.exists():
            raise DomainError(f"Smoothing constant file does not exist: {path}")
        with open(path) as f:
            data = json.load(f)
        return cls(N=int(data["N"]), d=int(data["d"]), value=float(data["value"]),
                   p_equals_q=float(data.get("p_equals_q", 0.0)))

    def export_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w") as f:
            f.write("t,p,q,ratio\n")
            for t, p, q, ratio in self.samples:
                f.write(f"{t!r},{p!r},{q!r},{ratio!r}\n")
        return path


def standard_pairs(exponents: Sequence[float] = STANDARD_EXPONENTS) -> List[Tuple[float, float]]:
    return [(p, q) for p in exponents for q in exponents if p <= q]


def _field_ratios(field: GridField, times: Sequence[float], pairs: Sequence[Tuple[float, float]],
                  d: int) -> List[Tuple[float, float, float, float]]:
    rows = []
    N = field.spec.dimension
    exponents = sorted({e for pair in pairs for e in pair})
    for t, evolved in zip(times, apply_many(field, times, d)):
        before = {e: lp_norm(field, e) for e in exponents}
        after = {e: lp_norm(evolved, e) for e in exponents}
        for p, q in pairs:
            denominator = t ** (-smoothing_exponent(N, d, p, q)) * before[p]
            ratio = after[q] / denominator if denominator > 0 else 0.0
            rows.append((float(t), float(p), float(q), float(ratio)))
    return rows


def smoothing_sweep(fields: Iterable[GridField], times: Sequence[float], d: int,
                    pairs: Optional[Sequence[Tuple[float, float]]] = None, jobs: int = 1) -> SmoothingConstant:
    """
    Smoothing ratios over fields x times x (p, q) pairs.

    Args:
        fields: Corpus of fields on one grid
        times: Positive times
        d: Operator order
        pairs: (p, q) pairs with p <= q; defaults to all pairs from {1, 2, 4, inf}
        jobs: Worker threads, one field per task

    Returns:
        SmoothingConstant whose value is the largest ratio seen
    """
    fields = list(fields)
    if not fields:
        raise DomainError("smoothing sweep needs at least one field")
    if any(t <= 0 for t in times):
        raise DomainError("smoothing sweep times must be positive")
    pairs = list(pairs) if pairs is not None else standard_pairs()
    for p, q in pairs:
        if not 1 <= p <= q:
            raise DomainError(f"invalid pair (p={p}, q={q})")

    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        chunks = list(pool.map(lambda f: _field_ratios(f, times, pairs, d), fields))
    samples = [row for chunk in chunks for row in chunk]
    value = max(row[3] for row in samples)
    diagonal = [row[3] for row in samples if row[1] == row[2]]
    constant = SmoothingConstant(
        N=fields[0].spec.dimension, d=d, value=value, samples=samples,
        p_equals_q=max(diagonal) if diagonal else 0.0,
    )
    logger.info(f"Smoothing sweep N={constant.N} d={d}: {len(samples)} samples, H={value:.6g}")
    return constant


def orlicz_smoothing_check(field: GridField, t: float, p: float, d: int, H: float) -> InequalityCheck:
    """
    Check ||S(t) u||_{exp L^2} <= H t^{-N/(2dp)} (log(t^{-N/(2d)} + 1))^{-1/2} ||u||_p.

    Args:
        field: Initial field
        t: Positive time
        p: Lebesgue exponent in [1, 2]
        d: Operator order
        H: Smoothing constant from smoothing_sweep
    """
    if not 1 <= p <= 2:
        raise DomainError(f"p must lie in [1, 2], got {p}")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    N = field.spec.dimension
    a = N / (2.0 * d)
    lhs = exp_l2_norm(SemigroupOp(d, t, field.spec).apply(field))
    rhs = H * t ** (-a / p) / math.sqrt(math.log1p(t ** (-a))) * lp_norm(field, p)
    return InequalityCheck(lhs, rhs, bool(lhs <= rhs * (1.0 + INEQUALITY_SLACK)))


def orlicz_smoothing_check_mixed(field: GridField, t: float, q: float, d: int, H: float) -> InequalityCheck:
    """Check ||S(t) u||_{exp L^2} <= (H / sqrt(log 2)) (t^{-N/(2dq)} ||u||_q + ||u||_2)."""
    if not q >= 1:
        raise DomainError(f"q must be >= 1, got {q}")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    N = field.spec.dimension
    lhs = exp_l2_norm(SemigroupOp(d, t, field.spec).apply(field))
    rhs = H / math.sqrt(math.log(2.0)) * (t ** (-N / (2.0 * d) * _inv(q)) * lp_norm(field, q) + lp_norm(field, 2))
    return InequalityCheck(lhs, rhs, bool(lhs <= rhs * (1.0 + INEQUALITY_SLACK)))


def kappa(t: float, N: int, q: float, d: int = 2, H: float = 1.0) -> float:
    """
    Weight of the L^1 cap L^q -> exp L^2 estimate,
    (2H/sqrt(log 2)) min{t^{-N/(2dq)} + 1, t^{-N/(2d)} (log(t^{-N/(2d)} + 1))^{-1/2}}.

    Requires N > 4d and q > N/(2d), the range where the weight is integrable.
    """
    if N <= 4 * d:
        raise DomainError(f"kappa needs N > 4d, got N={N}, d={d}")
    if not q > N / (2.0 * d):
        raise DomainError(f"kappa needs q > N/(2d) = {N / (2.0 * d):g}, got q={q}")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    a = N / (2.0 * d)
    near = t ** (-a / q) + 1.0
    x = t ** (-a)
    far = x / math.sqrt(math.log1p(x)) if x > 0 else 0.0
    return 2.0 * H / math.sqrt(math.log(2.0)) * min(near, far)


def zeta(t: float, H: float = 1.0) -> float:
    """Weight of the eight-dimensional estimate, (H/sqrt(log 2)) min{1 + t^{-1/2}, t^{-2} (log(t^{-2} + 1))^{-1/4}}."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    near = 1.0 + t ** -0.5
    x = t ** -2.0
    far = x * math.log1p(x) ** -0.25 if x > 0 else 0.0
    return H / math.sqrt(math.log(2.0)) * min(near, far)


@dataclass(frozen=True)
class WeightIntegral:
    value: float
    refined: float
    error_estimate: float

    @property
    def stability(self) -> float:
        return abs(self.value - self.refined) / abs(self.value)


def _integrate_pieces(weight: Callable[[float], float], breakpoints: Sequence[float]) -> Tuple[float, float]:
    edges = [0.0, *breakpoints, math.inf]
    total, error = 0.0, 0.0
    for a, b in zip(edges, edges[1:]):
        value, err = integrate.quad(weight, a, b, epsabs=0.0, epsrel=1e-11, limit=500)
        total += value
        error += err
    return total, error


def integrate_weight(weight: Callable[[float], float], breakpoints: Sequence[float] = (1.0,),
                     refined_breakpoints: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0)) -> WeightIntegral:
    """
    Integral of a weight over (0, inf) by adaptive quadrature on split intervals.

    The same integral on a finer split is returned alongside for the stability check.
    """
    value, error = _integrate_pieces(weight, breakpoints)
    refined, _ = _integrate_pieces(weight, refined_breakpoints)
    if not math.isfinite(value) or not math.isfinite(refined):
        raise QuadratureError("weight integral is not finite", error)
    logger.debug(f"Weight integral {value:.12g} (refined {refined:.12g})")
    return WeightIntegral(value, refined, error)


def continuity_at_zero(field: GridField, times: Sequence[float], d: int) -> List[float]:
    """||S(t) u0 - u0||_{exp L^2} for each of the positive, decreasing times."""
    times = [float(t) for t in times]
    if not times or any(t <= 0 for t in times):
        raise DomainError("times must be positive")
    if any(b >= a for a, b in zip(times, times[1:])):
        raise DomainError("times must be strictly decreasing")
    return [exp_l2_norm(evolved - field) for evolved in apply_many(field, times, d)]


@dataclass(frozen=True)
class ContinuityScan:
    """exp L^2 distances ||S(t) u0 - u0|| over a decreasing time window."""

    times: Tuple[float, ...]
    distances: Tuple[float, ...]

    @property
    def floor(self) -> float:
        return min(self.distances)

    @property
    def spread(self) -> float:
        """Largest over smallest distance; stays O(1) when u0 is not a point of continuity."""
        return max(self.distances) / self.floor if self.floor > 0 else math.inf

    def bounded_away(self, floor: float, spread: float) -> bool:
        return self.floor >= floor and self.spread <= spread

    def to_dict(self) -> Dict[str, Any]:
        return {
            "times": list(self.times),
            "distances": list(self.distances),
            "floor": self.floor,
            "spread": self.spread,
        }


def continuity_scan(field: GridField, times: Sequence[float], d: int) -> ContinuityScan:
    """
    Distances to the datum on a time window.

    On a grid the singular core of a rough datum is cut at the mesh width, so the
    discrete semigroup is continuous at t = 0 for every field. The window should
    keep the smoothing length t^(1/(2d)) many cells wide; over such a window a
    datum outside the closure of L^infinity keeps its distance, a smooth one loses
    it linearly in t.
    """
    times = tuple(float(t) for t in times)
    return ContinuityScan(times, tuple(continuity_at_zero(field, times, d)))


def continuity_floor_under_refinement(build: Callable[[GridSpec], GridField], specs: Sequence[GridSpec],
                                      times: Sequence[float], d: int) -> List[float]:
    """Smallest distance on the window for the datum sampled on each grid in turn."""
    floors = []
    for spec in specs:
        floors.append(continuity_scan(build(spec), times, d).floor)
        logger.debug(f"Continuity floor on {spec.shape}: {floors[-1]:.6g}")
    return floors
