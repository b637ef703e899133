"""
Randomized two-point Skorokhod embedding of a centered discrete law.

A pair (U, V) with U < 0 < V is drawn from the measure proportional to
(v - u) mu(du) mu(dv); the path is stopped at its first exit from [U, V].
Zero atoms stop at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from config.settings import COUPLING_CONFIG
from coupling.wiener import PathCursor
from models.noise import NoiseModel
from utils.errors import HorizonExhaustedError, InvalidArgumentError
from utils.logger import get_logger
from utils.rng import SeedLike, as_generator

logger = get_logger(__name__)

CENTER_TOL = 1e-9


class ScoreLaw:
    """
    Discrete centered law with atoms ``values`` (sorted) and ``weights``.

    ``eps`` holds one innovation per atom: the exact score preimage when the
    noise family can invert its score, otherwise the quantile the atom was
    built from, so landing on an atom picks a preimage with the right
    conditional weight.
    """

    invertible = True

    def __init__(self, values: Sequence[float], weights: Sequence[float], eps: Optional[Sequence[float]] = None):
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if values.shape != weights.shape or values.size == 0:
            raise InvalidArgumentError("atoms and weights must be non-empty and of equal length", module="coupling")
        if np.any(weights < 0) or not math.isclose(float(weights.sum()), 1.0, rel_tol=1e-9):
            raise InvalidArgumentError("weights must be nonnegative and sum to 1", module="coupling")
        order = np.argsort(values, kind="stable")
        self.values = values[order]
        self.weights = weights[order]
        self.eps = None if eps is None else np.asarray(eps, dtype=float)[order]
        scale = max(1.0, float(np.max(np.abs(self.values))))
        if abs(self.mean) > CENTER_TOL * scale:
            raise InvalidArgumentError(f"target law must be centered, mean = {self.mean:.3e}", module="coupling")

        self._neg = np.flatnonzero(self.values < 0)
        self._pos = np.flatnonzero(self.values > 0)
        self._zero = np.flatnonzero(self.values == 0)
        self.zero_weight = float(self.weights[self._zero].sum())
        wp = self.weights[self._pos]
        vp = self.values[self._pos]
        wn = self.weights[self._neg]
        un = np.abs(self.values[self._neg])
        self._w_plus = float(wp.sum())
        self._m1 = 0.5 * (float(np.dot(wp, vp)) + float(np.dot(wn, un)))
        self._cdf_lower = np.cumsum(wn * (self._m1 + un * self._w_plus))
        self._cum_wv = np.cumsum(wp * vp)
        self._cum_w = np.cumsum(wp)

    @classmethod
    def from_noise(cls, noise: NoiseModel, atoms: int = COUPLING_CONFIG["score_atoms"]) -> "ScoreLaw":
        """K equal atoms at the score of the midpoint quantiles, re-centered."""
        if atoms < 2:
            raise InvalidArgumentError(f"need at least 2 atoms, got {atoms}", module="coupling")
        u = (np.arange(atoms) + 0.5) / atoms
        quantiles = np.asarray(noise.ppf(u), dtype=float)
        scores = np.asarray(noise.score_at(quantiles), dtype=float)
        scores = scores - scores.mean()
        inverted = noise.invert_score(scores)
        eps = quantiles if inverted is None else np.asarray(inverted, dtype=float)
        law = cls(scores, np.full(atoms, 1.0 / atoms), eps)
        law.invertible = inverted is not None
        return law

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.values))

    @property
    def variance(self) -> float:
        return float(np.dot(self.weights, self.values ** 2))

    @property
    def size(self) -> int:
        return int(self.values.size)

    def cdf(self, x):
        """Right-continuous distribution function."""
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.ndim(x) == 0 else out

    def draw_pair(self, uniforms: Sequence[float]) -> Tuple[Optional[int], Optional[int]]:
        """
        Atom indices (lower, upper) from three uniforms; (i, i) for a zero atom.

        Three uniforms are always consumed so draw streams stay aligned.
        """
        r0, r1, r2 = (float(u) for u in uniforms[:3])
        if self._zero.size and (r0 < self.zero_weight or not self._neg.size):
            pick = self._zero[min(int(r1 * self._zero.size), self._zero.size - 1)]
            return int(pick), int(pick)
        a = int(np.searchsorted(self._cdf_lower, r1 * self._cdf_lower[-1], side="left"))
        a = min(a, self._neg.size - 1)
        u = abs(self.values[self._neg[a]])
        upper = self._cum_wv + u * self._cum_w
        b = int(np.searchsorted(upper, r2 * upper[-1], side="left"))
        b = min(b, self._pos.size - 1)
        return int(self._neg[a]), int(self._pos[b])

    def innovation(self, atom: int) -> float:
        if self.eps is None:
            raise InvalidArgumentError("this law carries no innovation preimages", module="coupling")
        return float(self.eps[atom])

    def describe(self) -> Dict[str, Any]:
        return {"atoms": self.size, "variance": self.variance, "zero_weight": self.zero_weight,
                "invertible": bool(self.invertible)}


@dataclass(frozen=True)
class StopResult:
    tau: float
    value: float
    atom: int


def exit_on_cursor(cursor: PathCursor, lo: float, hi: float) -> Optional[Tuple[float, bool, float]]:
    """
    Run ``cursor`` until the relative path leaves (lo, hi) or the horizon is reached.

    Returns:
        (time used, upper hit, stop time) on exit, or None when the horizon
        came first; the cursor is left untouched in that case.
    """
    path = cursor.path
    base = path.value(cursor.index)
    k = path.first_exit(cursor.index, cursor.horizon, base + lo, base + hi)
    if k is None:
        return None
    tau, upper = path.refine_exit(k, base + lo, base + hi)
    used = cursor.stop_at(k, tau)
    return used, upper, tau


def skorokhod_stop(cursor: PathCursor, target: ScoreLaw, seed: SeedLike) -> StopResult:
    """
    Stop the path behind ``cursor`` so that the increment has law ``target``.

    The increment is measured from the cursor's current position; the value
    returned is snapped to the reached atom.

    Raises:
        HorizonExhaustedError: the cursor's horizon arrives before the exit.
    """
    rng = as_generator(seed, "skorokhod_pair")
    lower, upper = target.draw_pair(rng.random(3))
    if lower == upper:
        return StopResult(tau=0.0, value=float(target.values[lower]), atom=lower)
    lo, hi = float(target.values[lower]), float(target.values[upper])
    hit = exit_on_cursor(cursor, lo, hi)
    if hit is None:
        raise HorizonExhaustedError(f"horizon reached at t = {cursor.time:.4f} before leaving [{lo:.4f}, {hi:.4f}]",
                                    module="coupling")
    used, up, _ = hit
    atom = upper if up else lower
    return StopResult(tau=used, value=float(target.values[atom]), atom=atom)
