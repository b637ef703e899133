"""
Uniform grids on a truncated real line and the functions that live on them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from config.settings import GRID_CONFIG
from utils.errors import InvalidArgumentError
from utils.file_utils import read_csv, read_json, write_csv, write_json

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_min, x_min + step, ..., x_max."""

    x_min: float = GRID_CONFIG["x_min"]
    x_max: float = GRID_CONFIG["x_max"]
    step: float = GRID_CONFIG["step"]

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise InvalidArgumentError(f"grid needs x_max > x_min, got [{self.x_min}, {self.x_max}]", module="models")
        if not self.step > 0:
            raise InvalidArgumentError(f"grid step must be positive, got {self.step}", module="models")
        cells = (self.x_max - self.x_min) / self.step
        if abs(cells - round(cells)) > 1e-6:
            raise InvalidArgumentError("grid step must divide the domain length", module="models")

    @property
    def size(self) -> int:
        return int(round((self.x_max - self.x_min) / self.step)) + 1

    @cached_property
    def points(self) -> np.ndarray:
        pts = self.x_min + self.step * np.arange(self.size, dtype=float)
        pts.setflags(write=False)
        return pts

    def integrate(self, values: np.ndarray) -> float:
        return float(trapezoid(values, dx=self.step))

    def cumulative(self, values: np.ndarray) -> np.ndarray:
        return cumulative_trapezoid(values, dx=self.step, initial=0.0)

    def derivative(self, values: np.ndarray) -> np.ndarray:
        return np.gradient(values, self.step, edge_order=2)

    def inside(self, a: float, b: float, tol: float = 1e-12) -> np.ndarray:
        """Mask of grid points in [a, b]."""
        x = self.points
        return (x >= a - tol) & (x <= b + tol)

    def is_aligned(self, x: float, tol: float = 1e-9) -> bool:
        pos = (x - self.x_min) / self.step
        return abs(pos - round(pos)) < tol

    def padded(self, pad: float) -> "Grid":
        """Grid with the same step extended by at least ``pad`` on both sides."""
        cells = int(math.ceil(pad / self.step - 1e-9))
        return Grid(self.x_min - cells * self.step, self.x_max + cells * self.step, self.step)


def default_grid() -> Grid:
    return Grid()


@dataclass(frozen=True, eq=False)
class GridFunction:
    """
    A real function sampled on a Grid.

    Evaluation off the grid points is linear interpolation. Outside the
    domain the function is continued by ``fill`` when given (densities use 0)
    and by its edge values otherwise.
    """

    grid: Grid
    values: np.ndarray
    name: str = ""
    fill: Optional[float] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise InvalidArgumentError(
                f"values of shape {values.shape} do not match grid of size {self.grid.size}", module="models")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray], name: str = "",
                      fill: Optional[float] = None) -> "GridFunction":
        return cls(grid, np.asarray(fn(grid.points), dtype=float), name=name, fill=fill)

    @classmethod
    def zeros(cls, grid: Grid, name: str = "zero") -> "GridFunction":
        return cls(grid, np.zeros(grid.size), name=name)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    def _edges(self):
        if self.fill is None:
            return self.values[0], self.values[-1]
        return self.fill, self.fill

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return self.evaluate(x)

    def evaluate(self, x: ArrayLike) -> ArrayLike:
        left, right = self._edges()
        out = np.interp(x, self.grid.points, self.values, left=left, right=right)
        if np.ndim(x) == 0:
            return float(out)
        return out

    def require_same_grid(self, other: "GridFunction") -> None:
        if self.grid != other.grid:
            raise InvalidArgumentError(f"grid mismatch between '{self.name}' and '{other.name}'", module="models")

    def derivative(self) -> "GridFunction":
        return GridFunction(self.grid, self.grid.derivative(self.values), name=f"{self.name}'")

    def sup_norm(self, mask: Optional[np.ndarray] = None) -> float:
        vals = self.values if mask is None else self.values[mask]
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def integral(self) -> float:
        return self.grid.integrate(self.values)

    def with_values(self, values: np.ndarray, name: Optional[str] = None) -> "GridFunction":
        return GridFunction(self.grid, values, name=self.name if name is None else name, fill=self.fill)

    def __add__(self, other: Any) -> "GridFunction":
        if isinstance(other, GridFunction):
            self.require_same_grid(other)
            return GridFunction(self.grid, self.values + other.values, name=f"{self.name}+{other.name}")
        return self.with_values(self.values + float(other))

    def __sub__(self, other: Any) -> "GridFunction":
        if isinstance(other, GridFunction):
            self.require_same_grid(other)
            return GridFunction(self.grid, self.values - other.values, name=f"{self.name}-{other.name}")
        return self.with_values(self.values - float(other))

    def __mul__(self, scalar: float) -> "GridFunction":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return self.with_values(-self.values)

    # serialization

    def to_descriptor(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "step": self.grid.step,
            "x_min": self.grid.x_min,
            "x_max": self.grid.x_max,
            "fill": self.fill,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_descriptor(cls, payload: Dict[str, Any]) -> "GridFunction":
        grid = Grid(float(payload["x_min"]), float(payload["x_max"]), float(payload["step"]))
        return cls(grid, np.asarray(payload["values"], dtype=float),
                   name=payload.get("name", ""), fill=payload.get("fill"))

    def to_json(self, path: Union[str, Path]) -> Path:
        return write_json(path, self.to_descriptor())

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "GridFunction":
        return cls.from_descriptor(read_json(path))

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = ({"x": x, "value": v} for x, v in zip(self.grid.points.tolist(), self.values.tolist()))
        return write_csv(path, ["x", "value"], rows)

    @classmethod
    def from_csv(cls, path: Union[str, Path], name: str = "", fill: Optional[float] = None) -> "GridFunction":
        rows = read_csv(path)
        if len(rows) < 2:
            raise InvalidArgumentError(f"{path} holds fewer than two grid points", module="models")
        x = np.array([float(r["x"]) for r in rows])
        v = np.array([float(r["value"]) for r in rows])
        steps = np.diff(x)
        if np.max(np.abs(steps - steps[0])) > 1e-9:
            raise InvalidArgumentError(f"{path} is not on a uniform grid", module="models")
        grid = Grid(float(x[0]), float(x[-1]), float(steps[0]))
        return cls(grid, v, name=name, fill=fill)


@dataclass(frozen=True, eq=False)
class GridDistribution:
    """
    Probability law whose density is the linear interpolant of grid values.

    The CDF is the exact (piecewise quadratic) integral of that interpolant
    and the quantile function inverts it cell by cell in closed form.
    """

    grid: Grid
    density: np.ndarray
    cdf_table: np.ndarray = field(init=False)

    def __post_init__(self):
        dens = np.clip(np.asarray(self.density, dtype=float), 0.0, None)
        h = self.grid.step
        cells = 0.5 * h * (dens[:-1] + dens[1:])
        table = np.concatenate(([0.0], np.cumsum(cells)))
        total = table[-1]
        if not total > 0:
            raise InvalidArgumentError("density has no mass on the grid", module="models")
        dens = dens / total
        table = table / total
        dens.setflags(write=False)
        table.setflags(write=False)
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "cdf_table", table)

    def cdf(self, x: ArrayLike) -> ArrayLike:
        g = self.grid
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        pos = (xa - g.x_min) / g.step
        i = np.clip(np.floor(pos).astype(np.int64), 0, g.size - 2)
        s = np.clip(xa - g.points[i], 0.0, g.step)
        a = self.density[i]
        b = self.density[i + 1]
        out = self.cdf_table[i] + a * s + (b - a) * s * s / (2.0 * g.step)
        out = np.where(pos < 0, 0.0, np.where(pos > g.size - 1, 1.0, out))
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if np.ndim(x) == 0 else out

    def quantile(self, u: ArrayLike) -> ArrayLike:
        g = self.grid
        ua = np.clip(np.atleast_1d(np.asarray(u, dtype=float)), 0.0, 1.0)
        i = np.clip(np.searchsorted(self.cdf_table, ua, side="right") - 1, 0, g.size - 2)
        r = np.clip(ua - self.cdf_table[i], 0.0, None)
        a = self.density[i]
        b = self.density[i + 1]
        disc = np.clip(a * a + 2.0 * (b - a) * r / g.step, 0.0, None)
        den = a + np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(den > 0, 2.0 * r / den, 0.0)
        x = g.points[i] + np.clip(s, 0.0, g.step)
        return float(x[0]) if np.ndim(u) == 0 else x

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.quantile(rng.random(size))

    def mass(self, a: float, b: float) -> float:
        return float(self.cdf(b) - self.cdf(a))
