"""
Exception hierarchy for polyheat.

Every error raised on purpose by the package derives from PolyheatError so the
CLI can map it onto an exit code.
"""

from typing import Any, Optional, Tuple


class PolyheatError(Exception):
    """Base class for all polyheat errors."""


class DomainError(PolyheatError, ValueError):
    """An argument lies outside the domain of an operation."""


class GridError(DomainError):
    """Invalid grid parameters or mismatched grids."""


class NonFiniteSampleError(DomainError):
    """A sampled function produced a non-finite value."""

    def __init__(self, index: Tuple[int, ...], point: Tuple[float, ...], value: float):
        self.index = index
        self.point = point
        self.value = value
        super().__init__(f"Non-finite sample {value!r} at node {index} (x={point})")


class InsufficientSamplesError(DomainError):
    """Too few usable samples for a regression."""


class HypothesisViolation(PolyheatError):
    """A hypothesis required by an estimate does not hold for the given input."""


class RegimeViolation(HypothesisViolation):
    """The parameters (m, N, d) fall outside the global small-data regime."""


class NonlinearityOverflowError(PolyheatError, ArithmeticError):
    """The nonlinearity or its Duhamel sum would overflow double precision."""

    def __init__(
        self,
        index: Tuple[int, ...],
        value: float,
        exponent: Optional[float],
        step: Optional[int] = None,
        time: Optional[float] = None,
    ):
        self.index = index
        self.value = value
        self.exponent = exponent
        self.step = step
        self.time = time
        where = f"node {index} (u={value:.6g}, lambda*u^2={exponent:.6g})" if exponent is not None \
            else f"node {index} (u={value:.6g}, Duhamel sum out of range)"
        if step is not None:
            where += f" at time step {step} (t={time:.6g})"
        super().__init__(f"Nonlinearity overflow at {where}")

    def with_step(self, step: int, time: float) -> "NonlinearityOverflowError":
        return NonlinearityOverflowError(self.index, self.value, self.exponent, step, time)


class QuadratureError(PolyheatError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message: str, error_estimate: float):
        self.error_estimate = error_estimate
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")


class MajorantInfeasibleError(PolyheatError):
    """No (K, mu) pair in the search box dominates the kernel profile."""


class SplitError(PolyheatError):
    """Initial data cannot be split with a remainder below the requested size."""


class TruncationError(PolyheatError):
    """Field mass at the periodic box boundary is not negligible."""

    def __init__(self, ratio: float, tolerance: float):
        self.ratio = ratio
        self.tolerance = tolerance
        super().__init__(
            f"Boundary-cell maximum is {ratio:.3e} of the sup norm (tolerance {tolerance:.1e}); "
            "enlarge box_length"
        )


class CheckFailedError(PolyheatError):
    """A numerical certificate did not hold."""

    def __init__(self, message: str, details: Any = None):
        self.details = details
        super().__init__(message)


class ConfigError(PolyheatError, ValueError):
    """Invalid run configuration."""
