"""
Haar multiresolution expansion on [A, B].

Dyadic intervals are half-open on the left, I_{j,k} = (s_{j,k-1}, s_{j,k}] with
s_{j,k} = A + k 2^-j (B - A); the point A belongs to the first interval.
Grid functions are integrated as left-continuous step functions on the
cells (x_{i-1}, x_i], which makes coefficients exact for step functions
with grid-aligned breaks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from config.settings import COUPLING_CONFIG
from models.grid import GridFunction
from utils.errors import InvalidArgumentError, SupportViolationError
from utils.file_utils import read_json, write_json
from utils.logger import get_logger

logger = get_logger(__name__)

SUPPORT_TOL = 1e-9
BOUND_SLACK = 1e-9


@dataclass(frozen=True, order=True)
class DyadicIndex:
    j: int
    k: int

    def __post_init__(self):
        if self.j < 0:
            raise InvalidArgumentError(f"dyadic level must be >= 0, got {self.j}", module="haar")
        if not 1 <= self.k <= 2 ** self.j:
            raise InvalidArgumentError(f"position {self.k} outside 1..{2 ** self.j} at level {self.j}",
                                       module="haar")

    @property
    def node_id(self) -> int:
        """Breadth-first position in the dyadic tree, root = 0."""
        return 2 ** self.j - 1 + (self.k - 1)

    def parent(self) -> Optional["DyadicIndex"]:
        if self.j == 0:
            return None
        return DyadicIndex(self.j - 1, (self.k + 1) // 2)

    def children(self) -> Tuple["DyadicIndex", "DyadicIndex"]:
        return DyadicIndex(self.j + 1, 2 * self.k - 1), DyadicIndex(self.j + 1, 2 * self.k)

    def interval(self, A: float, B: float) -> Tuple[float, float]:
        width = (B - A) / 2 ** self.j
        return A + (self.k - 1) * width, A + self.k * width

    def chain(self) -> List["DyadicIndex"]:
        """This node and its ancestors up to the root, finest first."""
        out = [self]
        node = self.parent()
        while node is not None:
            out.append(node)
            node = node.parent()
        return out

    def __str__(self) -> str:
        return f"({self.j},{self.k})"


def tree_indices(depth: int) -> Iterator[DyadicIndex]:
    """All (j, k) with 0 <= j <= depth, coarse to fine."""
    for j in range(depth + 1):
        for k in range(1, 2 ** j + 1):
            yield DyadicIndex(j, k)


def interval_index(x, A: float, B: float, j: int):
    """
    k with x in I_{j,k}; 0 for x outside [A, B]. Works elementwise on arrays.
    """
    if not A < B:
        raise InvalidArgumentError(f"need A < B, got [{A}, {B}]", module="haar")
    xa = np.asarray(x, dtype=float)
    scale = 2.0 ** j
    val = (xa - A) / (B - A) * scale
    snapped = np.rint(val)
    val = np.where(np.abs(val - snapped) < 1e-12 * max(1.0, scale), snapped, val)
    k = np.ceil(val).astype(np.int64)
    k = np.where(xa == A, 1, k)
    k = np.where((k < 1) | (k > 2 ** j), 0, k)
    return int(k) if np.ndim(x) == 0 else k


def _level_scale(A: float, B: float, j: int) -> float:
    return (B - A) ** -0.5 * 2.0 ** (j / 2.0)


def haar_eval(idx: Optional[DyadicIndex], x, A: float, B: float):
    """h_0 when ``idx`` is None, otherwise h_{j,k}."""
    if not A < B:
        raise InvalidArgumentError(f"need A < B, got [{A}, {B}]", module="haar")
    xa = np.asarray(x, dtype=float)
    if idx is None:
        out = np.where(interval_index(xa, A, B, 0) > 0, (B - A) ** -0.5, 0.0)
    else:
        child = interval_index(xa, A, B, idx.j + 1)
        sign = np.where(child == 2 * idx.k - 1, 1.0, np.where(child == 2 * idx.k, -1.0, 0.0))
        out = _level_scale(A, B, idx.j) * sign
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True, eq=False)
class HaarExpansion:
    A: float
    B: float
    c0: float
    levels: Tuple[np.ndarray, ...]
    residual_sup_bound: float = 0.0
    g_sup: float = 0.0
    g_slope: float = 0.0

    @property
    def j_star(self) -> int:
        return len(self.levels) - 1

    def coefficient(self, idx: DyadicIndex) -> float:
        if idx.j > self.j_star:
            return 0.0
        return float(self.levels[idx.j][idx.k - 1])

    def items(self) -> Iterator[Tuple[DyadicIndex, float]]:
        for j, level in enumerate(self.levels):
            for k, value in enumerate(level, start=1):
                yield DyadicIndex(j, k), float(value)

    @property
    def coeffs(self) -> Dict[DyadicIndex, float]:
        return dict(self.items())

    def zeroed(self) -> "HaarExpansion":
        return HaarExpansion(self.A, self.B, 0.0, tuple(np.zeros_like(l) for l in self.levels),
                             self.residual_sup_bound, self.g_sup, self.g_slope)

    def truncated(self, j_star: int) -> "HaarExpansion":
        if j_star > self.j_star:
            raise InvalidArgumentError(f"cannot extend expansion from {self.j_star} to {j_star}", module="haar")
        bound = (self.B - self.A) * 2.0 ** (-j_star - 2) * self.g_slope
        return HaarExpansion(self.A, self.B, self.c0, self.levels[:j_star + 1], bound, self.g_sup, self.g_slope)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "A": self.A,
            "B": self.B,
            "j_star": self.j_star,
            "c0": self.c0,
            "coeffs": [[idx.j, idx.k, value] for idx, value in self.items()],
            "residual_sup_bound": self.residual_sup_bound,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "HaarExpansion":
        j_star = int(payload["j_star"])
        levels = [np.zeros(2 ** j) for j in range(j_star + 1)]
        for j, k, value in payload.get("coeffs", []):
            levels[int(j)][int(k) - 1] = float(value)
        return cls(float(payload["A"]), float(payload["B"]), float(payload["c0"]), tuple(levels),
                   float(payload.get("residual_sup_bound", 0.0)))

    def to_json(self, path: Union[str, Path]) -> Path:
        return write_json(path, self.to_dict())

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "HaarExpansion":
        return cls.from_dict(read_json(path))


def _support_mask(g: GridFunction, A: float, B: float) -> np.ndarray:
    return g.grid.inside(A, B, tol=1e-12)


def step_cumulative(g: GridFunction):
    """G(x) = integral from x_min to x of the left-continuous step version of g."""
    grid = g.grid
    vals = np.asarray(g.values)
    table = np.concatenate(([0.0], np.cumsum(grid.step * vals[1:])))

    def G(x):
        xa = np.asarray(x, dtype=float)
        pos = (xa - grid.x_min) / grid.step
        i = np.clip(np.floor(pos).astype(np.int64), 0, grid.size - 2)
        frac = np.clip(xa - grid.points[i], 0.0, grid.step)
        return table[i] + frac * vals[i + 1]

    return G


def sup_slope(g: GridFunction, A: float, B: float) -> float:
    """Largest forward-difference slope over cells inside [A, B]."""
    x = g.grid.points
    cells = (x[:-1] >= A - 1e-12) & (x[1:] <= B + 1e-12)
    if not np.any(cells):
        return 0.0
    diffs = np.abs(np.diff(g.values))[cells] / g.grid.step
    return float(np.max(diffs))


def haar_expand(g: GridFunction, A: float, B: float, j_star: int) -> HaarExpansion:
    """
    Coefficients c_0 and c_{j,k}, 0 <= j <= j_star, by exact step-function quadrature.

    Raises:
        SupportViolationError: g is not zero outside [A, B].
    """
    if not A < B:
        raise InvalidArgumentError(f"need A < B, got [{A}, {B}]", module="haar")
    if j_star < 0:
        raise InvalidArgumentError(f"j_star must be >= 0, got {j_star}", module="haar")
    inside = _support_mask(g, A, B)
    leak = float(np.max(np.abs(g.values[~inside]))) if np.any(~inside) else 0.0
    if leak > SUPPORT_TOL:
        raise SupportViolationError(f"g reaches {leak:.3e} outside [{A}, {B}]", module="haar")

    G = step_cumulative(g)
    c0 = (B - A) ** -0.5 * float(G(B) - G(A))
    levels = []
    for j in range(j_star + 1):
        edges = A + (B - A) * np.arange(2 ** (j + 1) + 1) / 2 ** (j + 1)
        Ge = G(edges)
        left, mid, right = Ge[0:-1:2], Ge[1::2], Ge[2::2]
        levels.append(_level_scale(A, B, j) * (2.0 * mid - left - right))

    slope = sup_slope(g, A, B)
    bound = (B - A) * 2.0 ** (-j_star - 2) * slope
    return HaarExpansion(A, B, c0, tuple(levels), residual_sup_bound=bound,
                         g_sup=g.sup_norm(inside), g_slope=slope)


def haar_reconstruct(exp: HaarExpansion, x):
    """Partial sum through level j_star."""
    A, B = exp.A, exp.B
    xa = np.asarray(x, dtype=float)
    out = np.where(interval_index(xa, A, B, 0) > 0, exp.c0 * (B - A) ** -0.5, 0.0)
    for j, level in enumerate(exp.levels):
        child = interval_index(xa, A, B, j + 1)
        hit = child > 0
        k = np.where(hit, (child + 1) // 2, 1)
        sign = np.where(child % 2 == 1, 1.0, -1.0)
        out = out + np.where(hit, level[k - 1] * sign * _level_scale(A, B, j), 0.0)
    return float(out) if np.ndim(x) == 0 else out


@dataclass
class BoundsReport:
    ok: bool
    violations: List[str] = field(default_factory=list)
    checked: int = 0
    max_ratio: float = 0.0


def coefficient_bounds_check(exp: HaarExpansion, g: GridFunction, A: float, B: float) -> BoundsReport:
    """
    |c_0| <= (B-A)^(1/2) |g| and
    |c_{j,k}| <= min{(B-A)^(1/2) 2^(-j/2) |g|, (B-A)^(3/2) 2^(-3j/2-2) |g'|}.
    """
    g_sup = g.sup_norm(_support_mask(g, A, B))
    slope = sup_slope(g, A, B)
    violations: List[str] = []
    max_ratio = 0.0

    bound0 = (B - A) ** 0.5 * g_sup
    if abs(exp.c0) > bound0 + BOUND_SLACK:
        violations.append(f"|c0| = {abs(exp.c0):.6g} > {bound0:.6g}")
    if bound0 > 0:
        max_ratio = abs(exp.c0) / bound0

    checked = 1
    for j, level in enumerate(exp.levels):
        bound = min((B - A) ** 0.5 * 2.0 ** (-j / 2.0) * g_sup,
                    (B - A) ** 1.5 * 2.0 ** (-1.5 * j - 2.0) * slope)
        worst = float(np.max(np.abs(level)))
        checked += level.size
        if bound > 0:
            max_ratio = max(max_ratio, worst / bound)
        bad = np.nonzero(np.abs(level) > bound + BOUND_SLACK)[0]
        for k0 in bad:
            violations.append(f"|c{DyadicIndex(j, int(k0) + 1)}| = {abs(level[k0]):.6g} > {bound:.6g}")
    return BoundsReport(ok=not violations, violations=violations, checked=checked, max_ratio=max_ratio)


@dataclass
class ResidualReport:
    ok: bool
    max_residual: float
    bound: float
    slack: float


def residual_check(exp: HaarExpansion, g: GridFunction) -> ResidualReport:
    """Pointwise residual against (B-A) 2^(-j*-2) |g'| on the grid points of [A, B]."""
    mask = _support_mask(g, exp.A, exp.B)
    x = g.grid.points[mask]
    resid = np.abs(np.asarray(g.values)[mask] - haar_reconstruct(exp, x))
    worst = float(np.max(resid)) if resid.size else 0.0
    slack = BOUND_SLACK + g.grid.step * sup_slope(g, exp.A, exp.B)
    return ResidualReport(ok=worst <= exp.residual_sup_bound + slack, max_residual=worst,
                          bound=exp.residual_sup_bound, slack=slack)


def gram_matrix(A: float, B: float, max_level: int = 4, cells: int = 2 ** 12) -> np.ndarray:
    """Inner products of h_0 and all h_{j,k} with j <= max_level under midpoint quadrature."""
    x = A + (np.arange(cells) + 0.5) * (B - A) / cells
    rows = [haar_eval(None, x, A, B)]
    rows.extend(haar_eval(idx, x, A, B) for idx in tree_indices(max_level))
    basis = np.vstack(rows)
    return basis @ basis.T * (B - A) / cells


def parseval_check(exp: HaarExpansion, g: GridFunction, tol: float = 1e-9) -> Tuple[bool, float, float]:
    """(holds, sum of squared coefficients, integral of g^2 over [A, B])."""
    energy = exp.c0 ** 2 + sum(float(np.sum(level ** 2)) for level in exp.levels)
    G2 = step_cumulative(GridFunction(g.grid, np.square(g.values)))
    total = float(G2(exp.B) - G2(exp.A))
    return energy <= total + tol, energy, total


def j_star_required(m: int, lam: float, A: float, B: float, g_slope: float, fisher: float) -> int:
    """
    Smallest j >= 0 with m^(2 lam) (B - A) 2^(-j-2) |g'| m I <= m^(-lam), that is
    j >= (3 lam + 1) log2 m + log2((B - A) |g'| I) - 2. No cap.
    """
    if m < 2 or g_slope <= 0 or fisher <= 0:
        return 0
    log2_needed = ((3.0 * lam + 1.0) * math.log2(m) + math.log2((B - A) * g_slope * fisher)) - 2.0
    return max(0, int(math.ceil(log2_needed)))


def choose_j_star(m: int, lam: float, A: float, B: float, g_slope: float, fisher: float,
                  cap: int = COUPLING_CONFIG["j_star_cap"]) -> int:
    """
    j_star_required clipped at ``cap``; logs a warning when the cap binds.

    The residual rule grows like (3 lam + 1) log2 m, so at lam = 2 and
    m = 4096 it asks for j near 83 and the cap of 8 always binds.
    """
    required = j_star_required(m, lam, A, B, g_slope, fisher)
    if required > cap:
        logger.warning(f"Residual rule asks for j* = {required} at m = {m}; capping at {cap}")
        return cap
    return required
