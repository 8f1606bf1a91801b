#!/usr/bin/env python3
"""
Kernel Module

Radial profile of the polyharmonic heat kernel E_d(t, r), the inverse Fourier
transform of exp(-t |xi|^{2d}) on R^N, evaluated by Hankel-type quadrature,
plus an independent DFT route and the stretched-exponential majorant fit.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft, integrate, special

from polyheat.core.exceptions import DomainError, MajorantInfeasibleError, QuadratureError
from polyheat.core.grid import GridField, GridSpec
from polyheat.core.specfun import log_gamma, sphere_area

logger = logging.getLogger(__name__)

# exp(-46) ~ 1e-20: symbol is negligible beyond s^{2d} t = 46
SYMBOL_CUTOFF = 46.0
QUAD_EPSABS = 1e-15
QUAD_EPSREL = 1e-13
QUAD_LIMIT = 20000
ERROR_TARGET = 1e-8
DECAY_THRESHOLD = 1e-10
DECAY_SCAN_STEP = 0.25
DECAY_SCAN_MAX = 100.0
DFT_MIN_BOX = 64.0
MU_RANGE = (1e-2, 10.0)
K_MAX = 100.0


def _check_order(N: int, d: int):
    if N < 1:
        raise DomainError(f"dimension must be >= 1, got {N}")
    if d < 1:
        raise DomainError(f"order d must be >= 1, got {d}")


def bessel_ratio(nu: float, z: np.ndarray) -> np.ndarray:
    """J_nu(z) / z^nu, continuous at z = 0."""
    z = np.asarray(z, dtype=float)
    if nu == -0.5:
        return math.sqrt(2.0 / math.pi) * np.cos(z)
    if nu == 0.5:
        return math.sqrt(2.0 / math.pi) * np.sinc(z / math.pi)
    at_zero = math.exp(-nu * math.log(2.0) - special.gammaln(nu + 1.0))
    safe = np.where(z == 0.0, 1.0, z)
    return np.where(z == 0.0, at_zero, special.jv(nu, safe) / safe ** nu)


def bessel_zeros(nu: float, count: int) -> np.ndarray:
    """First `count` positive zeros of J_nu (exact McMahon form for half-integer nu)."""
    if count <= 0:
        return np.empty(0)
    if float(nu).is_integer():
        return special.jn_zeros(int(nu), count)
    k = np.arange(1, count + 1)
    return (k + 0.5 * nu - 0.25) * math.pi


def kernel_value_at_zero(N: int, d: int, t: float = 1.0) -> float:
    """Closed form (2 pi)^{-N} |S^{N-1}| Gamma(N/2d) / (2d) t^{-N/2d}."""
    _check_order(N, d)
    log_value = (
        -N * math.log(2.0 * math.pi)
        + math.log(sphere_area(N))
        + log_gamma(N / (2.0 * d))
        - math.log(2.0 * d)
        - N / (2.0 * d) * math.log(t)
    )
    return math.exp(log_value)


def _value_at_zero_by_quadrature(N: int, d: int, t: float) -> Tuple[float, float]:
    s_max = (SYMBOL_CUTOFF / t) ** (1.0 / (2 * d))
    value, error = integrate.quad(
        lambda s: s ** (N - 1) * math.exp(-t * s ** (2 * d)), 0.0, s_max,
        epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT,
    )
    scale = (2.0 * math.pi) ** (-N) * sphere_area(N)
    return scale * value, scale * error


def _quadrature_values(r: np.ndarray, N: int, d: int, t: float, workers: int) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized Hankel quadrature at positive radii; errors from the gk21/gk15 disagreement."""
    nu = 0.5 * N - 1.0
    s_max = (SYMBOL_CUTOFF / t) ** (1.0 / (2 * d))
    r_top = float(r.max())
    count = int(r_top * s_max / math.pi) + 2
    breaks = bessel_zeros(nu, count) / r_top
    breaks = breaks[(breaks > 0) & (breaks < s_max)]

    def integrand(s: float) -> np.ndarray:
        return s ** (N - 1) * bessel_ratio(nu, r * s) * math.exp(-t * s ** (2 * d))

    results = {}
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        for rule in ("gk21", "gk15"):
            results[rule], _ = integrate.quad_vec(
                integrand, 0.0, s_max,
                epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, norm="max",
                limit=QUAD_LIMIT, workers=pool.map if workers > 1 else 1,
                points=breaks if breaks.size else None, quadrature=rule,
            )
    scale = (2.0 * math.pi) ** (-0.5 * N)
    return scale * results["gk21"], scale * np.abs(results["gk21"] - results["gk15"])


def _lattice_sum(r: np.ndarray, N: int, d: int, t: float, box_length: float) -> np.ndarray:
    dk = 2.0 * math.pi / box_length
    s_max = (SYMBOL_CUTOFF / t) ** (1.0 / (2 * d))
    m = int(s_max / dk) + 1
    k = dk * np.arange(-m, m + 1)
    rest = np.zeros(1)
    for _ in range(N - 1):
        rest = (rest[:, None] + k[None, :] ** 2).ravel()
    marginal = np.array([np.exp(-t * (a * a + rest) ** d).sum() for a in k]) / box_length ** N
    return np.cos(np.outer(r, k)) @ marginal


def kernel_values_by_dft(radii: Union[Sequence[float], np.ndarray], N: int, d: int, t: float = 1.0,
                         box_length: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    E_d(t, r) from the inverse DFT of the sampled symbol, evaluated off-node.

    The symbol exp(-t |k|^{2d}) is summed over the frequency lattice of a
    periodic box, which gives the periodized kernel at x = (r, 0, ..., 0)
    for any r. The error estimate is the change when the box side doubles.

    Args:
        radii: Nonnegative radii
        N: Dimension
        d: Operator order
        t: Positive time
        box_length: Box side; defaults to max(64, 2 * largest radius + 32)

    Returns:
        (values, per-radius error estimates)
    """
    _check_order(N, d)
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    r = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise DomainError("radii must be finite and nonnegative")
    L = box_length
    if L is None:
        L = max(DFT_MIN_BOX, 2.0 * float(r.max(initial=0.0)) + 0.5 * DFT_MIN_BOX)
    coarse = _lattice_sum(r, N, d, t, L)
    fine = _lattice_sum(r, N, d, t, 2.0 * L)
    return fine, np.abs(fine - coarse)


def kernel_values(radii: Union[Sequence[float], np.ndarray], N: int, d: int, t: float = 1.0,
                  workers: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Evaluate E_d(t, r) at many radii with one vector-valued adaptive quadrature.

    E_d(t, r) = (2 pi)^{-N/2} int_0^inf s^{N-1} J_nu(rs)/(rs)^nu exp(-t s^{2d}) ds,
    nu = N/2 - 1. The integration range is cut where the symbol drops below
    e^{-46} and broken at the Bessel zeros of the largest radius. Radii whose
    error estimate misses the target are recomputed by kernel_values_by_dft.

    Args:
        radii: Nonnegative radii
        N: Dimension
        d: Order of the operator (-Delta)^d
        t: Positive time
        workers: Parallel workers passed to the quadrature

    Returns:
        (values, per-radius error estimates)

    Raises:
        QuadratureError: when a radius misses 1e-8 by both routes
    """
    _check_order(N, d)
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    r = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise DomainError("radii must be finite and nonnegative")

    values = np.empty_like(r)
    errors = np.zeros_like(r)
    zero = r == 0.0
    if np.any(zero):
        values[zero], errors[zero] = _value_at_zero_by_quadrature(N, d, t)
    if np.any(~zero):
        values[~zero], errors[~zero] = _quadrature_values(r[~zero], N, d, t, workers)

    missed = errors > ERROR_TARGET
    if np.any(missed):
        logger.warning(f"Kernel quadrature missed {ERROR_TARGET:g} at {int(missed.sum())} radii, using the DFT route")
        dft_values, dft_errors = kernel_values_by_dft(r[missed], N, d, t)
        better = dft_errors < errors[missed]
        index = np.flatnonzero(missed)[better]
        values[index], errors[index] = dft_values[better], dft_errors[better]

    worst = float(errors.max(initial=0.0))
    if worst > ERROR_TARGET:
        raise QuadratureError(f"kernel quadrature for N={N}, d={d}, t={t}", worst)
    logger.debug(f"Kernel N={N} d={d} t={t:g}: {r.size} radii, max error {worst:.2e}")
    return values, errors


def eval_profile(r: float, N: int, d: int) -> float:
    """E_d(1, r) for a single radius r >= 0."""
    if r < 0:
        raise DomainError(f"r must be nonnegative, got {r}")
    values, _ = kernel_values([r], N, d)
    return float(values[0])


def kernel_field(spec: GridSpec, d: int, t: float = 1.0, workers: int = 1) -> GridField:
    """E_d(t, |x|) sampled at the grid nodes."""
    radius = spec.radius()
    unique, inverse = np.unique(radius.ravel(), return_inverse=True)
    values, _ = kernel_values(unique, spec.dimension, d, t, workers=workers)
    return GridField(spec, values[inverse].reshape(spec.shape))


def kernel_mass(N: int, d: int, points_per_axis: Optional[int] = None) -> float:
    """
    Integral of E_d(1, .) over R^N by the trapezoid sum on a box beyond the decay radius.

    The kernel is smooth and rapidly decaying, so the node sum converges spectrally.
    """
    R = decay_radius(N, d)
    n = points_per_axis or {1: 1024, 2: 256, 3: 64}.get(N, 64)
    L = 2.0 * R + 2.0
    spec = GridSpec(N, n, L)
    return float(np.sum(kernel_field(spec, d).values) * spec.cell_volume)


@dataclass(frozen=True)
class ScalingCheck:
    lhs: float
    rhs: float
    rel_err: float


def scaling_check(t: float, x: Union[float, Sequence[float]], N: int, d: int) -> ScalingCheck:
    """
    Compare E_d(t, x) with t^{-N/2d} E_d(1, t^{-1/2d} |x|).

    The left side integrates the symbol exp(-t |xi|^{2d}) directly. The error is
    measured relative to the kernel maximum at time t so sign changes of E do
    not inflate it.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    lhs = float(kernel_values([r], N, d, t)[0][0])
    rhs = t ** (-N / (2.0 * d)) * float(kernel_values([t ** (-1.0 / (2 * d)) * r], N, d, 1.0)[0][0])
    peak = kernel_value_at_zero(N, d, t)
    return ScalingCheck(lhs, rhs, abs(lhs - rhs) / peak)


def profile_by_dft(N: int, d: int, box_length: float = 128.0, points_per_axis: int = 1024,
                   t: float = 1.0) -> GridField:
    """
    E_d(t, |x|) at grid nodes by inverse DFT of the sampled symbol.

    The inverse transform lands on nodes j*h; fftshift moves it onto the
    [-L/2, L/2) node layout.
    """
    _check_order(N, d)
    spec = GridSpec(N, points_per_axis, box_length)
    symbol = np.exp(-t * spec.frequency_squared(real=False) ** d)
    values = fft.ifftn(symbol).real * (points_per_axis / box_length) ** N
    return GridField(spec, fft.fftshift(values))


def decay_radius(N: int, d: int, threshold: float = DECAY_THRESHOLD) -> float:
    """Smallest scanned radius beyond which |E_d(1, r)| < threshold * E_d(1, 0)."""
    scan = np.arange(0.0, DECAY_SCAN_MAX + DECAY_SCAN_STEP, DECAY_SCAN_STEP)
    values, _ = kernel_values(scan, N, d)
    above = np.nonzero(np.abs(values) >= threshold * values[0])[0]
    last = int(above[-1])
    if last + 1 >= scan.size:
        raise DomainError(f"kernel does not decay below {threshold:g} within r = {DECAY_SCAN_MAX}")
    return float(scan[last + 1])


def count_sign_changes(values: np.ndarray, relative_floor: float = 1e-12) -> int:
    """Sign changes among samples whose magnitude is above the round-off floor."""
    values = np.asarray(values, dtype=float)
    floor = relative_floor * float(np.max(np.abs(values)))
    signs = np.sign(values[np.abs(values) > floor])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


@dataclass(frozen=True, eq=False)
class KernelProfile:
    """Tabulated E_d(1, r) on increasing radii."""

    N: int
    d: int
    radii: np.ndarray
    values: np.ndarray
    quad_error: np.ndarray
    value_at_zero: float

    @property
    def sign_changes(self) -> int:
        return count_sign_changes(np.concatenate(([self.value_at_zero], self.values)))

    def export_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w") as f:
            f.write("r,value,quad_error\n")
            f.write(f"0.0,{self.value_at_zero!r},0.0\n")
            for r, v, e in zip(self.radii, self.values, self.quad_error):
                f.write(f"{float(r)!r},{float(v)!r},{float(e)!r}\n")
        return path


def tabulate_profile(N: int, d: int, n_radii: int = 2048, r_min: float = 1e-3,
                     r_max: Optional[float] = None, workers: int = 1) -> KernelProfile:
    """
    Tabulate E_d(1, r) on log-spaced radii from r_min out to the decay radius.

    Args:
        N: Dimension
        d: Operator order
        n_radii: Number of radii
        r_min: Smallest radius (typically half a grid spacing)
        r_max: Largest radius; defaults to decay_radius(N, d)
        workers: Parallel quadrature workers
    """
    if n_radii < 2:
        raise DomainError(f"n_radii must be >= 2, got {n_radii}")
    r_max = r_max if r_max is not None else decay_radius(N, d)
    if not 0 < r_min < r_max:
        raise DomainError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    radii = np.geomspace(r_min, r_max, n_radii)
    values, errors = kernel_values(radii, N, d, workers=workers)
    logger.info(f"Tabulated E_{d} profile for N={N}: {n_radii} radii up to r={r_max:g}")
    return KernelProfile(
        N=N, d=d, radii=radii, values=values,
        quad_error=errors,
        value_at_zero=kernel_value_at_zero(N, d),
    )


def default_majorant_exponent(d: int) -> float:
    return 2.0 * d / (2.0 * d - 1.0)


def majorant_normalizer(mu: Union[float, np.ndarray], exponent: float, N: int) -> Union[float, np.ndarray]:
    """omega with 1/omega = int_{R^N} exp(-mu |eta|^beta) d eta."""
    mu = np.asarray(mu, dtype=float)
    log_integral = (
        math.log(sphere_area(N)) + log_gamma(N / exponent) - math.log(exponent)
        - (N / exponent) * np.log(mu)
    )
    out = np.exp(-log_integral)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MajorantFit:
    """|E(r)| <= K omega exp(-mu r^beta) with K > 1, mu > 0."""

    K: float
    mu: float
    omega: float
    exponent: float
    max_ratio: float
    N: int = 1
    d: int = 2
    extra: Dict[str, Any] = field(default_factory=dict, compare=False)

    def bound(self, r: np.ndarray) -> np.ndarray:
        return self.K * self.omega * np.exp(-self.mu * np.asarray(r, dtype=float) ** self.exponent)

    def holds_on(self, profile: KernelProfile) -> bool:
        ok_tail = np.all(np.abs(profile.values) <= self.bound(profile.radii))
        return bool(ok_tail and abs(profile.value_at_zero) <= self.K * self.omega)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "d": self.d,
            "K": self.K,
            "mu": self.mu,
            "omega": self.omega,
            "exponent": self.exponent,
            "max_ratio": self.max_ratio,
        }

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path


def fit_majorant(profile: KernelProfile, exponent: Optional[float] = None, mu_points: int = 400,
                 mu_range: Tuple[float, float] = MU_RANGE, K_max: float = K_MAX) -> MajorantFit:
    """
    Find (K, mu) with |E(r)| <= K omega(mu) exp(-mu r^beta) at every tabulated radius.

    K is minimized over a log-spaced mu grid. Ratios are formed in the log
    domain so large mu r^beta cannot overflow.

    Args:
        profile: Tabulated kernel profile, decayed below 1e-10 of its peak
        exponent: beta; defaults to 2d/(2d-1)
        mu_points: Size of the mu grid
        mu_range: Search interval for mu
        K_max: Largest acceptable K

    Raises:
        DomainError: profile not tabulated far enough out
        MajorantInfeasibleError: no mu in the grid gives K <= K_max
    """
    beta = exponent if exponent is not None else default_majorant_exponent(profile.d)
    if not beta > 0:
        raise DomainError(f"exponent must be positive, got {beta}")
    peak = abs(profile.value_at_zero)
    if abs(profile.values[-1]) >= DECAY_THRESHOLD * peak:
        raise DomainError(
            f"profile ends at r={profile.radii[-1]:g} with |E|={abs(profile.values[-1]):.2e}; "
            f"tabulate until |E| < {DECAY_THRESHOLD:g} * E(0)"
        )

    radii = np.concatenate(([0.0], profile.radii))
    magnitude = np.abs(np.concatenate(([profile.value_at_zero], profile.values)))
    mus = np.geomspace(mu_range[0], mu_range[1], mu_points)
    log_omega = np.log(majorant_normalizer(mus, beta, profile.N))
    with np.errstate(divide="ignore"):
        log_mag = np.log(magnitude)
    # log of |E(r_i)| / (omega(mu) exp(-mu r_i^beta)) for every (mu, r_i)
    log_ratio = log_mag[None, :] - log_omega[:, None] + mus[:, None] * radii[None, :] ** beta
    log_K = log_ratio.max(axis=1)
    best = int(np.argmin(log_K))
    ratio = float(np.exp(log_K[best])) if log_K[best] < 700 else math.inf
    K = max(ratio, 1.0) * (1.0 + 1e-9)
    if not K <= K_max:
        raise MajorantInfeasibleError(
            f"no mu in [{mu_range[0]:g}, {mu_range[1]:g}] gives K <= {K_max:g} (best K = {ratio:.3g})"
        )
    fit = MajorantFit(
        K=K, mu=float(mus[best]), omega=float(np.exp(log_omega[best])),
        exponent=beta, max_ratio=ratio, N=profile.N, d=profile.d,
    )
    logger.info(f"Majorant fit N={profile.N} d={profile.d}: K={fit.K:.6g} mu={fit.mu:.6g}")
    return fit
