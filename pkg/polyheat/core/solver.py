#!/usr/bin/env python3
"""
Solver Module

Picard iteration for the Duhamel form of du/dt + (-Delta)^d u = f(u),
f(u) = sign |u|^{m-1} u exp(lambda u^2), with a left-endpoint exponential
integrator in time, the smooth/small splitting of the initial data, and the
trajectory diagnostics built on top of it.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft, stats

from polyheat.core import decay
from polyheat.core.exceptions import (
    DomainError,
    HypothesisViolation,
    InsufficientSamplesError,
    NonlinearityOverflowError,
    SplitError,
)
from polyheat.core.grid import GridField, GridSpec, gaussian_bump, lp_norm, lp_norm_values, random_smooth_field
from polyheat.core.orlicz import EXP_ARG_LIMIT, exp_l2_norm, luxemburg_norm_values
from polyheat.core.semigroup import apply_many

logger = logging.getLogger(__name__)

DEFAULT_TRACKED = (2.0, math.inf)
_TINY = 1e-300
LOG_FLOAT_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class NonlinearitySpec:
    """f(u) = sign |u|^{m-1} u exp(lambda u^2); sign 0 switches the source off."""

    m: float
    lam: float
    sign: int = 1

    def __post_init__(self):
        if not self.m >= 1:
            raise DomainError(f"m must be >= 1, got {self.m}")
        if not self.lam >= 0:
            raise DomainError(f"lambda must be >= 0, got {self.lam}")
        if self.sign not in (-1, 0, 1):
            raise DomainError(f"sign must be -1, 0 or +1, got {self.sign}")

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def global_regime_ok(self, N: int, d: int) -> bool:
        """m >= 2 and N(m-1)/(2d) >= 2."""
        return self.m >= 2 and N * (self.m - 1) / (2.0 * d) >= 2.0

    def to_dict(self) -> Dict[str, Any]:
        return {"m": self.m, "lambda": self.lam, "sign": self.sign}


def eval_nonlinearity_values(spec: NonlinearitySpec, u: np.ndarray) -> np.ndarray:
    """f on raw samples; raises NonlinearityOverflowError naming the worst node."""
    if spec.is_zero:
        return np.zeros_like(u)
    exponent = spec.lam * u * u
    with np.errstate(divide="ignore"):
        log_magnitude = spec.m * np.log(np.abs(u)) + exponent
    unsafe = (exponent > EXP_ARG_LIMIT) | (log_magnitude > LOG_FLOAT_MAX)
    if np.any(unsafe):
        index = np.unravel_index(int(np.argmax(np.where(unsafe, log_magnitude, -np.inf))), u.shape)
        raise NonlinearityOverflowError(tuple(int(i) for i in index), float(u[index]), float(exponent[index]))
    power = np.abs(u) ** (spec.m - 1.0) * u if spec.m != 1 else u.copy()
    return spec.sign * power * np.exp(exponent)


def eval_nonlinearity(spec: NonlinearitySpec, field: GridField) -> GridField:
    """Pointwise sign |u|^{m-1} u exp(lambda u^2)."""
    return field.with_values(eval_nonlinearity_values(spec, field.values))


def eval_nonlinearity_series(spec: NonlinearitySpec, field: GridField, terms: int) -> GridField:
    """f with exp(lambda u^2) replaced by its Taylor polynomial of `terms` terms."""
    if terms < 1:
        raise DomainError(f"terms must be >= 1, got {terms}")
    u = field.values
    if spec.is_zero:
        return field.with_values(np.zeros_like(u))
    x = spec.lam * u * u
    term = np.ones_like(u)
    acc = np.ones_like(u)
    for k in range(1, terms):
        term = term * x / k
        acc = acc + term
    return field.with_values(spec.sign * np.abs(u) ** (spec.m - 1.0) * u * acc)


def lipschitz_constant(spec: NonlinearitySpec, rng: np.random.Generator, samples: int = 10_000,
                       bound: float = 2.0) -> float:
    """
    Smallest C with |f(u) - f(v)| <= C |u - v| (|u|^{m-1} e^{lam u^2} + |v|^{m-1} e^{lam v^2})
    over random pairs in [-bound, bound]^2.
    """
    u = rng.uniform(-bound, bound, samples)
    v = rng.uniform(-bound, bound, samples)
    keep = u != v
    u, v = u[keep], v[keep]
    fu = eval_nonlinearity_values(spec, u)
    fv = eval_nonlinearity_values(spec, v)
    weight = np.abs(u) ** (spec.m - 1) * np.exp(spec.lam * u * u) + np.abs(v) ** (spec.m - 1) * np.exp(spec.lam * v * v)
    denominator = np.abs(u - v) * weight
    mask = denominator > 0
    return float(np.max(np.abs(fu - fv)[mask] / denominator[mask])) if np.any(mask) else 0.0


def build_time_grid(T: float, steps: int) -> np.ndarray:
    """
    Time nodes: 0, then t1 = T/steps^2 doubled while below T/steps, then uniform steps of T/steps up to T.
    """
    if not T > 0:
        raise DomainError(f"T must be positive, got {T}")
    if steps < 8:
        raise DomainError(f"steps must be >= 8, got {steps}")
    delta = T / steps
    geometric = []
    t = delta / steps
    while t < delta * (1.0 - 1e-12):
        geometric.append(t)
        t *= 2.0
    uniform = delta * np.arange(1, steps + 1)
    uniform[-1] = T
    return np.concatenate(([0.0], geometric, uniform))


def dealias_mask(spec: GridSpec) -> np.ndarray:
    """2/3-rule mask on the rfftn half-spectrum."""
    n = spec.points_per_axis
    cutoff = n / 3.0
    full = np.abs(np.fft.fftfreq(n, d=1.0 / n)) <= cutoff
    half = np.abs(np.fft.rfftfreq(n, d=1.0 / n)) <= cutoff
    axes = [full] * spec.dimension
    axes[-1] = half
    mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
    mask = mesh[0]
    for m in mesh[1:]:
        mask = mask & m
    return mask


@dataclass(eq=False)
class Trajectory:
    """Fields on a time grid with per-time norms; times[0] = 0 carries the datum."""

    times: np.ndarray
    fields: List[GridField]
    d: int
    nonlinearity: NonlinearitySpec
    norms: Dict[float, np.ndarray] = field(default_factory=dict)
    exp_l2: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.fields) != self.times.size:
            raise DomainError("one field per time is required")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("times must be strictly increasing")

    @property
    def spec(self) -> GridSpec:
        return self.fields[0].spec

    @property
    def tracked(self) -> List[float]:
        return sorted(self.norms)

    def track(self, ps: Sequence[float], exp_l2: bool = True) -> "Trajectory":
        """Compute and store L^p norms (and exp L^2 norms) at every time."""
        for p in ps:
            p = float(p)
            if p not in self.norms:
                self.norms[p] = np.array([lp_norm(f, p) for f in self.fields])
        if exp_l2 and self.exp_l2 is None:
            self.exp_l2 = np.array([exp_l2_norm(f) for f in self.fields])
        return self

    def norm(self, p: float) -> np.ndarray:
        p = float(p)
        if p not in self.norms:
            raise DomainError(f"p={p} is not tracked (tracked: {self.tracked})")
        return self.norms[p]

    @property
    def final(self) -> GridField:
        return self.fields[-1]

    def export_norms_csv(self, path: Union[str, Path]) -> Path:
        """t, L<p> columns..., expL2 with round-trip float formatting."""
        path = Path(path)
        ps = self.tracked
        header = ["t"] + [f"L{'inf' if math.isinf(p) else f'{p:g}'}" for p in ps]
        if self.exp_l2 is not None:
            header.append("expL2")
        with open(path, "w") as f:
            f.write(",".join(header) + "\n")
            for j, t in enumerate(self.times):
                row = [float(t)] + [float(self.norms[p][j]) for p in ps]
                if self.exp_l2 is not None:
                    row.append(float(self.exp_l2[j]))
                f.write(",".join(repr(v) for v in row) + "\n")
        return path


@dataclass
class PicardReport:
    """Outcome of a Picard iteration."""

    iterations: int
    contraction_factors: List[float]
    converged: bool
    final_residual: float
    tolerance: float
    metric: str
    sigma: Optional[float] = None
    p_star: Optional[float] = None
    stop_reason: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "contraction_factors": self.contraction_factors,
            "converged": self.converged,
            "final_residual": self.final_residual,
            "tolerance": self.tolerance,
            "metric": self.metric,
            "sigma": self.sigma,
            "p_star": None if self.p_star is None or math.isinf(self.p_star) else self.p_star,
            "stop_reason": self.stop_reason,
        }


def linear_orbit(u0: GridField, times: Sequence[float], d: int) -> List[GridField]:
    """exp(-t (-Delta)^d) u0 at each time."""
    return apply_many(u0, times, d)


Source = Callable[[int, np.ndarray], np.ndarray]


def _accumulation_overflow(u: np.ndarray) -> NonlinearityOverflowError:
    """Finite f whose Duhamel sum left the float range; reported at the largest |u|."""
    index = np.unravel_index(int(np.argmax(np.abs(u))), u.shape)
    return NonlinearityOverflowError(tuple(int(i) for i in index), float(u[index]), None)


class _DuhamelEngine:
    """Left-endpoint exponential-integrator Duhamel sums on a fixed time grid."""

    def __init__(self, spec: GridSpec, times: np.ndarray, d: int):
        self.spec = spec
        self.times = times
        self.k2d = spec.frequency_squared(real=True) ** d
        self.mask = dealias_mask(spec)
        self._propagators: Dict[float, np.ndarray] = {}

    def _propagator(self, dt: float) -> np.ndarray:
        # uniform steps differ by round-off only; share one propagator
        key = float(f"{dt:.12e}")
        if key not in self._propagators:
            self._propagators[key] = np.exp(-key * self.k2d)
        return self._propagators[key]

    def duhamel(self, iterate: List[np.ndarray], source: Source) -> List[np.ndarray]:
        """
        D_j = sum_{i<j} w_i S(t_j - t_i) f_i, with w_i = t_{i+1} - t_i,
        through G_{j+1} = S(t_{j+1} - t_j)(G_j + w_j dealias(f_j)).
        """
        shape = self.spec.shape
        acc = np.zeros_like(self.k2d, dtype=complex)
        out = [np.zeros(shape)]
        for j in range(self.times.size - 1):
            dt = self.times[j + 1] - self.times[j]
            try:
                fj = source(j, iterate[j])
            except NonlinearityOverflowError as e:
                raise e.with_step(j, float(self.times[j])) from None
            with np.errstate(over="ignore", invalid="ignore"):
                acc = self._propagator(dt) * (acc + dt * self.mask * fft.rfftn(fj))
                gj = fft.irfftn(acc, s=shape)
            if not np.all(np.isfinite(gj)):
                raise _accumulation_overflow(iterate[j]).with_step(j, float(self.times[j]))
            out.append(gj)
        return out


def _weighted_metric(times: np.ndarray, arrays: List[np.ndarray], cell_volume: float,
                     sigma: float, p: float) -> float:
    best = 0.0
    for t, a in zip(times[1:], arrays[1:]):
        best = max(best, t ** sigma * lp_norm_values(a, cell_volume, p))
    return best


def _exp_metric(arrays: List[np.ndarray], spec: GridSpec) -> float:
    return max(luxemburg_norm_values(a, spec.cell_volume, spec.volume) for a in arrays)


def _picard(linear: List[np.ndarray], engine: _DuhamelEngine, source: Source, tol: float,
            max_iter: int, metric: Callable[[List[np.ndarray]], float], metric_name: str,
            sigma: Optional[float], p_star: Optional[float]) -> Tuple[List[np.ndarray], PicardReport]:
    """
    Iterate u <- L + D[u] from the linear orbit.

    Distances are taken between successive Duhamel parts so the exact linear part
    never enters the subtraction. A factor >= 1 or an overflow after the first
    sweep stops the iteration with converged = False.
    """
    previous_d = [np.zeros_like(a) for a in linear]
    iterate = linear
    factors: List[float] = []
    distance = math.inf
    last = None
    converged = False
    reason = "max_iter"
    k = 0
    while k < max_iter:
        try:
            current_d = engine.duhamel(iterate, source)
        except NonlinearityOverflowError as e:
            if k == 0:
                raise
            logger.warning(f"Picard iterate {k} overflowed: {e}")
            factors.append(math.inf)
            reason = "overflow"
            break
        k += 1
        with np.errstate(over="ignore", invalid="ignore"):
            candidate = [lin + dj for lin, dj in zip(linear, current_d)]
            distance = metric([a - b for a, b in zip(current_d, previous_d)])
        if not (math.isfinite(distance) and all(np.all(np.isfinite(a)) for a in candidate)):
            if k == 1:
                raise _accumulation_overflow(linear[0]).with_step(0, 0.0)
            logger.warning(f"Picard iterate {k - 1}: distance left the float range")
            factors.append(math.inf)
            reason = "overflow"
            break
        iterate = candidate
        previous_d = current_d
        if last is not None:
            factor = distance / last if last > 0 else 0.0
            factors.append(factor)
            if factor >= 1.0:
                reason = "non_contracting"
                logger.info(f"Picard iteration {k}: contraction factor {factor:.3g} >= 1, stopping")
                break
        with np.errstate(over="ignore"):
            size = metric(iterate)
        logger.debug(f"Picard iteration {k}: distance {distance:.3e} (scale {size:.3e})")
        if not math.isfinite(size):
            factors.append(math.inf)
            reason = "overflow"
            break
        if distance <= tol * max(size, _TINY):
            converged = True
            reason = "converged"
            break
        last = distance

    with np.errstate(over="ignore"):
        scale = metric(iterate)
    residual = distance / max(scale, _TINY) if math.isfinite(distance) and math.isfinite(scale) else math.inf
    report = PicardReport(
        iterations=k, contraction_factors=factors, converged=converged,
        final_residual=residual, tolerance=tol, metric=metric_name,
        sigma=sigma, p_star=p_star, stop_reason=reason,
    )
    return iterate, report


def _select_metric(u0: GridField, nonlinearity: NonlinearitySpec, d: int, times: np.ndarray,
                   sigma: Optional[float], p_star: Optional[float]):
    spec = u0.spec
    N = spec.dimension
    if sigma is None and p_star is None and nonlinearity.global_regime_ok(N, d):
        admissible = decay.admissible_p_range(nonlinearity.m, N, d)
        p_star = admissible.pick()
        sigma = decay.sigma_theory(nonlinearity.m, N, p_star, d)
    if sigma is not None and p_star is not None:
        name = f"sup t^{sigma:.6g} ||.||_{p_star:g}"
        return (lambda arrays: _weighted_metric(times, arrays, spec.cell_volume, sigma, p_star)), name, sigma, p_star
    return (lambda arrays: _exp_metric(arrays, spec)), "sup ||.||_expL2", None, None


def duhamel_solve(u0: GridField, nonlinearity: NonlinearitySpec, d: int, T: float, steps: int,
                  p_track: Sequence[float] = DEFAULT_TRACKED, tol: float = 1e-12, max_iter: int = 50,
                  sigma: Optional[float] = None, p_star: Optional[float] = None,
                  track_exp_l2: bool = True) -> Tuple[Trajectory, PicardReport]:
    """
    Solve u(t) = S(t) u0 + int_0^t S(t - s) f(u(s)) ds by Picard iteration.

    In the global small-data regime the distance is sup_j t_j^sigma ||.||_{p*}
    with (sigma, p*) from the decay formulas; otherwise it is sup_j ||.||_{exp L^2}.

    Args:
        u0: Initial field
        nonlinearity: f
        d: Operator order
        T: Final time
        steps: Uniform steps of size T/steps (a geometric start is added)
        p_track: Lebesgue exponents recorded per time
        tol: Relative stopping tolerance on successive distances
        max_iter: Iteration cap
        sigma: Override the weight exponent of the metric
        p_star: Override the Lebesgue exponent of the metric
        track_exp_l2: Record exp L^2 norms per time

    Returns:
        (Trajectory, PicardReport)

    Raises:
        NonlinearityOverflowError: f overflows on the linear orbit (with step and time)
    """
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")
    times = build_time_grid(T, steps)
    linear = [f.values for f in linear_orbit(u0, times, d)]
    engine = _DuhamelEngine(u0.spec, times, d)
    metric, name, sigma, p_star = _select_metric(u0, nonlinearity, d, times, sigma, p_star)

    if nonlinearity.is_zero:
        fields = linear_orbit(u0, times, d)
        report = PicardReport(1, [], True, 0.0, tol, name, sigma, p_star, "converged")
    else:
        source = lambda j, u: eval_nonlinearity_values(nonlinearity, u)  # noqa: E731
        arrays, report = _picard(linear, engine, source, tol, max_iter, metric, name, sigma, p_star)
        fields = [GridField(u0.spec, a) for a in arrays]

    trajectory = Trajectory(times, fields, d, nonlinearity).track(p_track, exp_l2=track_exp_l2)
    logger.info(
        f"Duhamel solve d={d} T={T:g}: {report.iterations} iterations, converged={report.converged}"
    )
    return trajectory, report


def split_initial_data(u0: GridField, eps: float,
                       amplitude_cap: Optional[float] = None) -> Tuple[GridField, GridField]:
    """
    Split u0 = v0 + w0 with v0 a low-pass truncation and ||w0||_{exp L^2} <= eps.

    The radial Fourier cutoff starts at the first nonzero shell and doubles up to
    the 2/3 band. With amplitude_cap the low-pass part is clipped to [-cap, cap].

    Raises:
        SplitError: even the full 2/3 band leaves ||w0|| > eps
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if amplitude_cap is not None and not amplitude_cap > 0:
        raise DomainError(f"amplitude_cap must be positive, got {amplitude_cap}")
    spec = u0.spec
    fits_cap = amplitude_cap is None or u0.sup <= amplitude_cap
    spectrum = fft.rfftn(u0.values)
    radius = np.sqrt(spec.frequency_squared(real=True))
    band = dealias_mask(spec)
    fundamental = 2.0 * math.pi / spec.box_length
    top = fundamental * spec.points_per_axis / 3.0
    scale = float(np.max(np.abs(spectrum))) if spectrum.size else 0.0

    cutoff = fundamental
    while True:
        keep = band & (radius <= cutoff * (1.0 + 1e-12))
        band_limited = scale == 0.0 or np.max(np.abs(np.where(keep, 0.0, spectrum))) <= 1e-13 * scale
        if band_limited and fits_cap:
            logger.info(f"Initial data is band-limited at cutoff {cutoff:.4g}; w0 = 0")
            return u0, GridField.zeros(spec)
        v = fft.irfftn(np.where(keep, spectrum, 0.0), s=spec.shape)
        if amplitude_cap is not None:
            v = np.clip(v, -amplitude_cap, amplitude_cap)
        w = u0.values - v
        size = luxemburg_norm_values(w, spec.cell_volume, spec.volume)
        logger.debug(f"Split cutoff {cutoff:.4g}: ||w0||_expL2 = {size:.4g}")
        if size <= eps:
            logger.info(f"Split at cutoff {cutoff:.4g} with ||w0||_expL2 = {size:.4g}")
            return GridField(spec, v), GridField(spec, w)
        if cutoff >= top:
            raise SplitError(
                f"remainder norm {size:.4g} exceeds eps={eps:g} even at the 2/3 band; "
                "refine the grid or relax eps"
            )
        cutoff = min(2.0 * cutoff, top)


@dataclass
class PerturbationLipschitz:
    """
    Ratios ||f(w1 + v) - f(w2 + v)||_q / (e^{2 lam ||v||_inf^2} ||w1 - w2||_{exp L^2})
    over sampled pairs; `constant` is the smallest C_q valid on the sample.
    """

    q: float
    K: float
    v_sup: float
    ratios: List[float]

    @property
    def constant(self) -> float:
        return max(self.ratios, default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"q": self.q, "K": self.K, "v_sup": self.v_sup, "pairs": len(self.ratios),
                "constant": self.constant}


def perturbation_pairs(spec: GridSpec, rng: np.random.Generator, count: int,
                       size: float) -> List[Tuple[GridField, GridField]]:
    """Pairs of random smooth fields, each scaled to exp L^2 norm `size`."""
    if not size > 0:
        raise DomainError(f"size must be positive, got {size}")
    pairs = []
    for _ in range(count):
        a, b = (random_smooth_field(spec, rng) for _ in range(2))
        pairs.append((a * (size / exp_l2_norm(a)), b * (size / exp_l2_norm(b))))
    return pairs


def perturbation_lipschitz(nonlinearity: NonlinearitySpec, v: GridField,
                           pairs: Sequence[Tuple[GridField, GridField]], q: float) -> PerturbationLipschitz:
    """
    Sample the Lipschitz bound of w -> f(w + v) - f(v) used by the perturbed problem.

    Needs 2 <= q < inf and 4 lam q K^2 <= 1, K the largest exp L^2 norm among the w's.

    Raises:
        HypothesisViolation: 4 lam q K^2 > 1
    """
    q = float(q)
    if not 2.0 <= q < math.inf:
        raise DomainError(f"q must lie in [2, inf), got {q}")
    K = max((exp_l2_norm(w) for pair in pairs for w in pair), default=0.0)
    if 4.0 * nonlinearity.lam * q * K * K > 1.0 + 1e-12:
        raise HypothesisViolation(f"4*lambda*q*K^2 = {4.0 * nonlinearity.lam * q * K * K:.6g} exceeds 1")
    cv = v.spec.cell_volume
    weight = math.exp(2.0 * nonlinearity.lam * v.sup ** 2)
    ratios = []
    for w1, w2 in pairs:
        gap = exp_l2_norm(w1 - w2)
        if gap == 0.0:
            continue
        difference = (eval_nonlinearity_values(nonlinearity, (w1 + v).values)
                      - eval_nonlinearity_values(nonlinearity, (w2 + v).values))
        ratios.append(lp_norm_values(difference, cv, q) / (weight * gap))
    logger.debug(f"Perturbation Lipschitz ratios over {len(ratios)} pairs: max {max(ratios, default=0.0):.4g}")
    return PerturbationLipschitz(q, K, v.sup, ratios)


@dataclass
class SplitResult:
    v: Trajectory
    w: Trajectory
    residual: float
    v_report: PicardReport
    w_report: PicardReport
    direct_report: PicardReport


def split_solve(u0: GridField, nonlinearity: NonlinearitySpec, d: int, T: float, steps: int,
                eps: float, tol: float = 1e-12, max_iter: int = 50,
                p_track: Sequence[float] = DEFAULT_TRACKED,
                amplitude_cap: Optional[float] = None) -> SplitResult:
    """
    Solve the smooth problem for v from v0, then the perturbed problem for w from w0
    with source f(w + v) - f(v), and compare v + w with a direct solve from u0.

    residual = sup_t ||v + w - u||_2 / sup_t ||u||_2. amplitude_cap clips v0 to
    [-cap, cap] so the smooth problem stays below the overflow range of f; the
    clipped excess moves into w0.
    """
    v0, w0 = split_initial_data(u0, eps, amplitude_cap)
    v_traj, v_report = duhamel_solve(v0, nonlinearity, d, T, steps, p_track, tol, max_iter)
    direct, direct_report = duhamel_solve(u0, nonlinearity, d, T, steps, p_track, tol, max_iter)

    times = v_traj.times
    v_arrays = [f.values for f in v_traj.fields]
    linear = [f.values for f in linear_orbit(w0, times, d)]
    if nonlinearity.is_zero:
        w_arrays = linear
        w_report = PicardReport(1, [], True, 0.0, tol, "sup ||.||_expL2", stop_reason="converged")
    else:
        def source(j: int, w: np.ndarray) -> np.ndarray:
            return (eval_nonlinearity_values(nonlinearity, w + v_arrays[j])
                    - eval_nonlinearity_values(nonlinearity, v_arrays[j]))

        engine = _DuhamelEngine(u0.spec, times, d)
        metric, name, sigma, p_star = _select_metric(u0, nonlinearity, d, times, None, None)
        w_arrays, w_report = _picard(linear, engine, source, tol, max_iter, metric, name, sigma, p_star)
    w_traj = Trajectory(times, [GridField(u0.spec, a) for a in w_arrays], d, nonlinearity).track(p_track)

    cv = u0.spec.cell_volume
    gap = max(lp_norm_values(v + w - u.values, cv, 2)
              for v, w, u in zip(v_arrays, w_arrays, direct.fields))
    scale = max(lp_norm(u, 2) for u in direct.fields)
    residual = gap / scale if scale > 0 else gap
    logger.info(f"Split solve residual {residual:.3e}")
    return SplitResult(v_traj, w_traj, residual, v_report, w_report, direct_report)


@dataclass(frozen=True)
class YMMembership:
    value: float
    holds: bool
    M: float


def ym_membership(traj: Trajectory, M: float, p: float, sigma: float) -> YMMembership:
    """sup_j t_j^sigma ||u(t_j)||_p + max_j ||u(t_j)||_{exp L^2} compared with M."""
    norms = traj.norm(p)
    if traj.exp_l2 is None:
        traj.track([], exp_l2=True)
    weighted = max((t ** sigma * n for t, n in zip(traj.times[1:], norms[1:])), default=0.0)
    value = float(weighted + np.max(traj.exp_l2))
    return YMMembership(value, bool(value <= M), M)


def continuity_residual(traj: Trajectory, u0: GridField, d: int) -> np.ndarray:
    """||u(t_j) - S(t_j) u0||_{exp L^2} at every t_j > 0."""
    linear = linear_orbit(u0, traj.times[1:], d)
    return np.array([exp_l2_norm(u - lin) for u, lin in zip(traj.fields[1:], linear)])


def continuity_rate_bound(N: int, d: int, q: float) -> float:
    """Slope guaranteed near t = 0 by the bound C1 t + C2 t^{1 - N/(2dq)}."""
    return min(1.0, 1.0 - N / (2.0 * d * q))


def continuity_slope(traj: Trajectory, u0: GridField, d: int, decades: float = 1.0) -> float:
    """Log-log slope of the continuity residual over the smallest `decades` of positive times."""
    residual = continuity_residual(traj, u0, d)
    t = traj.times[1:]
    window = (t <= t[0] * 10 ** decades * (1 + 1e-12)) & (residual > 0)
    if np.count_nonzero(window) < 3:
        raise InsufficientSamplesError("need at least three nonzero residuals in the first decade")
    return float(stats.linregress(np.log(t[window]), np.log(residual[window])).slope)


@dataclass(frozen=True)
class RichardsonResult:
    steps: Tuple[int, int, int]
    differences: Tuple[float, float]
    order: float


def richardson_order(u0: GridField, nonlinearity: NonlinearitySpec, d: int, T: float, steps: int,
                     tol: float = 1e-14, max_iter: int = 100) -> RichardsonResult:
    """Observed time order from final-time solutions at steps, 2 steps and 4 steps."""
    finals = []
    counts = (steps, 2 * steps, 4 * steps)
    for s in counts:
        traj, report = duhamel_solve(u0, nonlinearity, d, T, s, p_track=(2.0,), tol=tol,
                                     max_iter=max_iter, track_exp_l2=False)
        if not report.converged:
            logger.warning(f"Richardson run with {s} steps did not converge ({report.stop_reason})")
        finals.append(traj.final)
    e1 = lp_norm(finals[0] - finals[1], 2)
    e2 = lp_norm(finals[1] - finals[2], 2)
    order = math.log2(e1 / e2) if e1 > 0 and e2 > 0 else math.nan
    return RichardsonResult(counts, (e1, e2), order)


def gaussian_datum(spec: GridSpec, amplitude: float, width: float = 1.0) -> GridField:
    """Centered Gaussian bump scaled so its exp L^2 norm equals `amplitude`."""
    if amplitude < 0:
        raise DomainError(f"amplitude must be nonnegative, got {amplitude}")
    bump = gaussian_bump(spec, width)
    if amplitude == 0:
        return GridField.zeros(spec)
    return bump * (amplitude / exp_l2_norm(bump))
