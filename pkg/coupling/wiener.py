"""
Lazily extended Brownian paths indexed by dyadic intervals.

A path lives on the grid k*dt. Every cell (k-1, k] also carries two uniforms
that fix the maximum and the minimum of the Brownian bridge across the cell,
so barrier crossings inside a cell are decided the same way for every
barrier and every reader of the path. Exit cells are refined by bisection
from a stream keyed by (node, cell), so two readers that refine the same
cell see the same bridge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.settings import COUPLING_CONFIG
from haar.expansion import DyadicIndex, interval_index
from utils.errors import InvalidArgumentError
from utils.logger import get_logger
from utils.rng import SeedLike, indexed_substream, seed_sequence

logger = get_logger(__name__)

EXTERIOR = -1
BLOCK = 4096


def index_of(node: int) -> DyadicIndex:
    """Inverse of DyadicIndex.node_id."""
    if node < 0:
        raise InvalidArgumentError("the exterior node has no dyadic index", module="coupling")
    j = int(math.floor(math.log2(node + 1)))
    return DyadicIndex(j, node - (2 ** j - 1) + 1)


def bridge_extreme(a, b, length, u, upper: bool):
    """Maximum (upper=True) or minimum of a Brownian bridge from a to b over ``length``, by inversion of u."""
    half = 0.5 * (a - b)
    spread = np.sqrt(half * half - 0.5 * length * np.log(u))
    mid = 0.5 * (a + b)
    return mid + spread if upper else mid - spread


class BrownianPath:
    """W on the grid k*dt, extended in fixed blocks so content never depends on read order."""

    def __init__(self, seed: SeedLike, node: int, dt: float, levels: int = COUPLING_CONFIG["bisection_levels"]):
        if not dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {dt}", module="coupling")
        self.seed = seed_sequence(seed)
        self.node = node
        self.dt = float(dt)
        self.levels = int(levels)
        self._rng = indexed_substream(self.seed, "wiener", (node,))
        self._w = np.zeros(BLOCK + 1)
        self._umax = np.ones(BLOCK + 1)
        self._umin = np.ones(BLOCK + 1)
        self._filled = 0
        self._refined: Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    @property
    def length(self) -> int:
        return self._filled

    def ensure(self, k: int) -> None:
        """Make cells up to k available."""
        while self.length < k:
            z = self._rng.standard_normal(BLOCK)
            umax = self._rng.random(BLOCK)
            umin = self._rng.random(BLOCK)
            n = self._filled
            if n + BLOCK + 1 > self._w.size:
                self._grow(2 * self._w.size)
            self._w[n + 1:n + BLOCK + 1] = self._w[n] + np.cumsum(np.sqrt(self.dt) * z)
            # 1 - U keeps the log argument in (0, 1]
            self._umax[n + 1:n + BLOCK + 1] = 1.0 - umax
            self._umin[n + 1:n + BLOCK + 1] = 1.0 - umin
            self._filled = n + BLOCK

    def _grow(self, size: int) -> None:
        for name in ("_w", "_umax", "_umin"):
            old = getattr(self, name)
            new = np.ones(size)
            new[:old.size] = old
            setattr(self, name, new)

    def value(self, k: int) -> float:
        self.ensure(k)
        return float(self._w[k])

    def time(self, k: int) -> float:
        return k * self.dt

    def cell_extremes(self, lo_k: int, hi_k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(right endpoint values, cell maxima, cell minima) for cells lo_k+1..hi_k."""
        self.ensure(hi_k)
        a = self._w[lo_k:hi_k]
        b = self._w[lo_k + 1:hi_k + 1]
        mx = bridge_extreme(a, b, self.dt, self._umax[lo_k + 1:hi_k + 1], True)
        mn = bridge_extreme(a, b, self.dt, self._umin[lo_k + 1:hi_k + 1], False)
        return b, mx, mn

    def _refinement(self, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        cached = self._refined.get(k)
        if cached is None:
            rng = indexed_substream(self.seed, "bridge", (self.node, k))
            nodes = 2 ** (self.levels + 1)
            cached = (rng.standard_normal(nodes), 1.0 - rng.random(nodes), 1.0 - rng.random(nodes))
            self._refined[k] = cached
        return cached

    def refine_exit(self, k: int, lo: float, hi: float) -> Tuple[float, bool]:
        """
        Locate the exit from (lo, hi) inside cell (k-1, k] by bisection.

        Returns:
            (time, upper) with time the right end of the finest sub-cell that
            crosses and upper True when the upper barrier was hit.
        """
        z, umax, umin = self._refinement(k)
        ta, tb = (k - 1) * self.dt, k * self.dt
        va, vb = self.value(k - 1), self.value(k)
        s = 1
        for _ in range(self.levels):
            length = tb - ta
            vm = 0.5 * (va + vb) + math.sqrt(0.25 * length) * z[s]
            left = 2 * s
            half = 0.5 * length
            crossed_left = (vm >= hi or vm <= lo
                            or bridge_extreme(va, vm, half, umax[left], True) >= hi
                            or bridge_extreme(va, vm, half, umin[left], False) <= lo)
            if crossed_left:
                tb, vb, s = ta + half, vm, left
            else:
                ta, va, s = ta + half, vm, left + 1
        length = tb - ta
        if vb >= hi:
            return tb, True
        if vb <= lo:
            return tb, False
        up = bridge_extreme(va, vb, length, umax[s], True) >= hi
        down = bridge_extreme(va, vb, length, umin[s], False) <= lo
        if up and down:
            up = abs(hi - vb) <= abs(vb - lo)
        elif not up and not down:
            up = abs(hi - vb) <= abs(vb - lo)
        return tb, up

    def first_exit(self, start: int, limit: Optional[int], lo: float, hi: float) -> Optional[int]:
        """First cell k in start+1..limit whose bridge leaves (lo, hi); None when the stretch stays inside."""
        chunk = 256
        k0 = start
        while limit is None or k0 < limit:
            k1 = k0 + chunk if limit is None else min(limit, k0 + chunk)
            _, mx, mn = self.cell_extremes(k0, k1)
            hit = (mx >= hi) | (mn <= lo)
            if np.any(hit):
                return k0 + 1 + int(np.argmax(hit))
            k0 = k1
            chunk = min(chunk * 2, 65536)
        return None


@dataclass
class PathCursor:
    """One reader's position on one path plus the stretches it consumed."""

    path: BrownianPath
    horizon: Optional[int] = None
    index: int = 0
    time: float = 0.0
    stretches: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def remaining(self) -> Optional[int]:
        if self.horizon is None:
            return None
        return max(self.horizon - self.index, 0)

    @property
    def exhausted(self) -> bool:
        return self.horizon is not None and self.index >= self.horizon

    def consume_to_horizon(self) -> Tuple[float, float]:
        """Use the rest of the stretch up to the horizon; returns (increment, time used)."""
        start_t = self.index * self.path.dt
        inc = self.path.value(self.horizon) - self.path.value(self.index)
        end_t = self.horizon * self.path.dt
        self.stretches.append((start_t, end_t))
        self.index = self.horizon
        self.time = end_t
        return inc, end_t - start_t

    def stop_at(self, cell: int, tau: float) -> float:
        """Record a stop at time tau inside ``cell``; the cursor resumes at the cell's right end."""
        start_t = self.index * self.path.dt
        self.stretches.append((start_t, tau))
        self.index = cell
        self.time = cell * self.path.dt
        return tau - start_t


class WienerFamily:
    """
    Independent Wiener processes W_{j,k} for the dyadic tree of depth ``depth``
    plus one exterior process for covariates outside [A, B].

    ``horizons`` maps node ids to T_{j,k}; missing nodes, the root and the
    exterior process are unbounded.
    """

    def __init__(self, seed: SeedLike, depth: int, A: float, B: float, dt: float,
                 horizons: Optional[Dict[int, float]] = None,
                 levels: int = COUPLING_CONFIG["bisection_levels"]):
        if depth < 0:
            raise InvalidArgumentError(f"tree depth must be >= 0, got {depth}", module="coupling")
        self.seed = seed_sequence(seed)
        self.depth = depth
        self.A = A
        self.B = B
        self.dt = float(dt)
        self.levels = levels
        self.horizons = dict(horizons or {})
        self._paths: Dict[int, BrownianPath] = {}
        self._pair_uniforms: Dict[int, np.ndarray] = {}
        self._pair_rngs: Dict[int, np.random.Generator] = {}

    def path(self, node: int) -> BrownianPath:
        p = self._paths.get(node)
        if p is None:
            p = BrownianPath(self.seed, node, self.dt, self.levels)
            self._paths[node] = p
        return p

    def horizon_index(self, node: int) -> Optional[int]:
        if node <= 0:
            return None
        T = self.horizons.get(node)
        if T is None or not np.isfinite(T):
            return None
        return int(math.floor(T / self.dt + 1e-9))

    def cursor(self, node: int) -> PathCursor:
        return PathCursor(self.path(node), self.horizon_index(node))

    def chain(self, x: float) -> List[int]:
        """Node ids from the leaf containing x up to the root, or the exterior node."""
        k = interval_index(x, self.A, self.B, self.depth)
        if k == 0:
            return [EXTERIOR]
        return [idx.node_id for idx in DyadicIndex(self.depth, int(k)).chain()]

    def pair_uniforms(self, node: int, visit: int) -> np.ndarray:
        """Three uniforms for the visit-th randomized pair drawn at ``node``."""
        store = self._pair_uniforms.get(node)
        if store is None:
            self._pair_rngs[node] = indexed_substream(self.seed, "skorokhod_pair", (node,))
            store = np.empty((0, 3))
        while store.shape[0] <= visit:
            store = np.vstack((store, self._pair_rngs[node].random((1024, 3))))
        self._pair_uniforms[node] = store
        return store[visit]

    @property
    def nodes(self) -> List[int]:
        return [idx.node_id for j in range(self.depth + 1) for idx in
                (DyadicIndex(j, k) for k in range(1, 2 ** j + 1))]
