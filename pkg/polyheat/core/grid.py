#!/usr/bin/env python3
"""
Grid Module

Uniform periodic grids on [-L/2, L/2)^N, immutable sampled fields, Lebesgue
norms and field persistence. Every other module works on GridField values.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from polyheat.core.exceptions import (
    DomainError,
    GridError,
    NonFiniteSampleError,
    TruncationError,
)

logger = logging.getLogger(__name__)

BOUNDARY_TOLERANCE = 1e-8
_FIELD_FORMAT = "polyheat-field/1"


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """
    Periodic box [-L/2, L/2)^N sampled with n points per axis.

    Node i on each axis sits at -L/2 + i*h, so the origin is always a node.
    """

    dimension: int
    points_per_axis: int
    box_length: float

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.points_per_axis < 8 or not _is_power_of_two(self.points_per_axis):
            raise GridError(f"points_per_axis must be a power of two >= 8, got {self.points_per_axis}")
        if not (self.box_length > 0 and math.isfinite(self.box_length)):
            raise GridError(f"box_length must be positive, got {self.box_length}")

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    @property
    def volume(self) -> float:
        return self.box_length ** self.dimension

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dimension

    def axis(self) -> np.ndarray:
        return -0.5 * self.box_length + self.spacing * np.arange(self.points_per_axis)

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Node coordinates as N broadcastable arrays (ij indexing)."""
        axis = self.axis()
        return tuple(np.meshgrid(*([axis] * self.dimension), indexing="ij", sparse=True))

    def radius(self, clip: bool = False) -> np.ndarray:
        """
        Euclidean distance of every node to the origin.

        Args:
            clip: Replace radii below h/2 with h/2 (used for singular witnesses)
        """
        r = np.sqrt(sum(c ** 2 for c in self.coordinates()))
        r = np.broadcast_to(r, self.shape).copy()
        if clip:
            np.maximum(r, 0.5 * self.spacing, out=r)
        return r

    def point(self, index: Tuple[int, ...]) -> Tuple[float, ...]:
        axis = self.axis()
        return tuple(float(axis[i]) for i in index)

    def frequency_squared(self, real: bool = True) -> np.ndarray:
        """
        |xi|^2 on the DFT frequency grid, frequencies scaled by 2*pi/L.

        Args:
            real: Use the half-spectrum layout of an rfftn transform
        """
        n, h = self.points_per_axis, self.spacing
        full = 2.0 * math.pi * np.fft.fftfreq(n, d=h)
        axes = [full] * self.dimension
        if real:
            axes[-1] = 2.0 * math.pi * np.fft.rfftfreq(n, d=h)
        mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
        return sum(k ** 2 for k in mesh)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dimension": self.dimension,
            "points_per_axis": self.points_per_axis,
            "box_length": self.box_length,
        }


@dataclass(frozen=True, eq=False)
class GridField:
    """Real-valued samples on a GridSpec. Values are copied and made read-only."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.size != self.spec.size:
            raise GridError(f"field has {arr.size} samples, grid expects {self.spec.size}")
        arr = arr.reshape(self.spec.shape)
        if not np.all(np.isfinite(arr)):
            index = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
            raise NonFiniteSampleError(index, self.spec.point(index), float(arr[index]))
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridField":
        return cls(spec, np.zeros(spec.shape))

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(self.spec, values)

    def _check_same_grid(self, other: "GridField"):
        if other.spec != self.spec:
            raise GridError(f"grid mismatch: {self.spec} vs {other.spec}")

    def __add__(self, other: "GridField") -> "GridField":
        self._check_same_grid(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridField") -> "GridField":
        self._check_same_grid(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "GridField":
        return self.with_values(float(scalar) * self.values)

    __rmul__ = __mul__

    def __abs__(self) -> "GridField":
        return self.with_values(np.abs(self.values))

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_zero(self) -> bool:
        return not np.any(self.values)


def lp_norm_values(values: np.ndarray, cell_volume: float, p: float) -> float:
    """Discrete L^p norm of raw samples with quadrature weight cell_volume."""
    p = float(p)
    if not p >= 1:
        raise DomainError(f"p must be >= 1 or inf, got {p}")
    a = np.abs(values)
    peak = float(a.max()) if a.size else 0.0
    if p == math.inf or peak == 0.0:
        return peak
    # rescale by the peak so large p cannot overflow
    return peak * float(np.sum((a / peak) ** p) * cell_volume) ** (1.0 / p)


def lp_norm(field: GridField, p: float) -> float:
    """
    Lebesgue norm of a sampled field.

    Args:
        field: The sampled field
        p: Exponent in [1, inf]

    Returns:
        (sum |u_i|^p h^N)^(1/p), or max |u_i| for p = inf
    """
    return lp_norm_values(field.values, field.spec.cell_volume, p)


def sample_function(spec: GridSpec, f: Callable[..., Any]) -> GridField:
    """
    Sample f at every grid node.

    f is called once with the N coordinate arrays (broadcastable, ij layout)
    and must return an array broadcastable to the grid shape.
    """
    values = np.asarray(f(*spec.coordinates()), dtype=float)
    values = np.broadcast_to(values, spec.shape)
    return GridField(spec, values)


def sample_radial(spec: GridSpec, g: Callable[[np.ndarray], np.ndarray], clip: bool = True) -> GridField:
    """Sample a radial profile g(|x|), with radii below h/2 clipped to h/2."""
    return GridField(spec, g(spec.radius(clip=clip)))


def indicator_field(spec: GridSpec, height: float, measure: float) -> GridField:
    """
    Indicator of an exact union of cells with total measure `measure`.

    The cells closest to the origin are chosen; measure must be a whole
    number of cell volumes.
    """
    cells = measure / spec.cell_volume
    count = int(round(cells))
    if count < 1 or count > spec.size or abs(count - cells) > 1e-9 * max(cells, 1.0):
        raise GridError(f"measure {measure} is not a whole number of cells of volume {spec.cell_volume}")
    order = np.argsort(spec.radius().ravel(), kind="stable")
    values = np.zeros(spec.size)
    values[order[:count]] = height
    return GridField(spec, values)


def gaussian_bump(spec: GridSpec, width: float, height: float = 1.0,
                  center: Optional[Tuple[float, ...]] = None) -> GridField:
    """height * exp(-|x - center|^2 / (2 width^2))."""
    if width <= 0:
        raise DomainError(f"width must be positive, got {width}")
    center = center or (0.0,) * spec.dimension
    coords = spec.coordinates()
    r2 = sum((c - c0) ** 2 for c, c0 in zip(coords, center))
    return GridField(spec, np.broadcast_to(height * np.exp(-0.5 * r2 / width ** 2), spec.shape))


def random_smooth_field(spec: GridSpec, rng: np.random.Generator, n_bumps: int = 3) -> GridField:
    """
    Sum of a few randomly placed Gaussian bumps, negligible at the box boundary.

    Centers lie within L/8 of the origin, widths in [L/40, L/20].
    """
    L = spec.box_length
    coords = spec.coordinates()
    total = np.zeros(spec.shape)
    for _ in range(n_bumps):
        center = rng.uniform(-L / 8, L / 8, size=spec.dimension)
        width = rng.uniform(L / 40, L / 20)
        height = rng.normal()
        r2 = sum((c - c0) ** 2 for c, c0 in zip(coords, center))
        total = total + height * np.exp(-0.5 * r2 / width ** 2)
    return GridField(spec, total)


def boundary_ratio(field: GridField) -> float:
    """Max |u| over boundary cells divided by the sup norm (0 for the zero field)."""
    peak = field.sup
    if peak == 0.0:
        return 0.0
    v = np.abs(field.values)
    edge = 0.0
    for axis in range(field.spec.dimension):
        edge = max(edge, float(np.take(v, 0, axis=axis).max()), float(np.take(v, -1, axis=axis).max()))
    return edge / peak


def ensure_negligible_boundary(field: GridField, tolerance: float = BOUNDARY_TOLERANCE) -> float:
    """Return the boundary ratio, raising TruncationError when it exceeds tolerance."""
    ratio = boundary_ratio(field)
    if ratio > tolerance:
        raise TruncationError(ratio, tolerance)
    logger.debug(f"Boundary ratio {ratio:.3e} within tolerance {tolerance:.1e}")
    return ratio


def save_field(field: GridField, path: Union[str, Path]) -> Path:
    """Write a JSON header line followed by little-endian float64 samples."""
    path = Path(path)
    header = dict(field.spec.to_dict(), format=_FIELD_FORMAT, dtype="<f8")
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        f.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    return path


def load_field(path: Union[str, Path]) -> GridField:
    """Read a field written by save_field."""
    path = Path(path)
    if not path.exists():
        raise DomainError(f"Field file does not exist: {path}")
    with open(path, "rb") as f:
        try:
            header = json.loads(f.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise DomainError(f"{path} has no valid field header: {e}") from e
        payload = f.read()
    if header.get("format") != _FIELD_FORMAT:
        raise DomainError(f"{path} is not a polyheat field file")
    spec = GridSpec(int(header["dimension"]), int(header["points_per_axis"]), float(header["box_length"]))
    values = np.frombuffer(payload, dtype="<f8")
    return GridField(spec, values)


def export_csv(field: GridField, path: Union[str, Path]) -> Path:
    """Write (x, value) rows for a one-dimensional field."""
    if field.spec.dimension != 1:
        raise DomainError("CSV export is only defined for N = 1 fields")
    path = Path(path)
    with open(path, "w") as f:
        f.write("x,value\n")
        for x, v in zip(field.spec.axis(), field.values):
            f.write(f"{float(x)!r},{float(v)!r}\n")
    return path
