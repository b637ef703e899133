"""
Splitting of the indices 1..n into K_n = ceil(n^(1/6)) consecutive blocks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Tuple

import numpy as np

from utils.errors import InvalidArgumentError


def block_count(n: int) -> int:
    """Smallest integer k with k^6 >= n, i.e. ceil(n^(1/6)) without float rounding."""
    k = max(1, int(round(n ** (1.0 / 6.0))))
    while k ** 6 < n:
        k += 1
    while k > 1 and (k - 1) ** 6 >= n:
        k -= 1
    return k


@dataclass(frozen=True)
class BlockPartition:
    n: int
    K: int
    starts: Tuple[int, ...]
    sizes: Tuple[int, ...]

    @property
    def blocks(self) -> List[range]:
        """1-based index ranges I_l."""
        return [range(s, s + m) for s, m in zip(self.starts, self.sizes)]

    def indices(self, l: int) -> np.ndarray:
        """1-based indices of block l (1 <= l <= K)."""
        if not 1 <= l <= self.K:
            raise InvalidArgumentError(f"block {l} outside 1..{self.K}", module="likelihood")
        s = self.starts[l - 1]
        return np.arange(s, s + self.sizes[l - 1])

    def slices(self) -> Iterator[slice]:
        """0-based slices into arrays indexed by i - 1."""
        for s, m in zip(self.starts, self.sizes):
            yield slice(s - 1, s - 1 + m)

    def block_of(self, i: int) -> int:
        for l, (s, m) in enumerate(zip(self.starts, self.sizes), start=1):
            if s <= i < s + m:
                return l
        raise InvalidArgumentError(f"index {i} outside 1..{self.n}", module="likelihood")


def partition(n: int) -> BlockPartition:
    if n < 1:
        raise InvalidArgumentError(f"partition needs n >= 1, got {n}", module="likelihood")
    K = block_count(n)
    bounds = [(l * n) // K for l in range(K + 1)]
    starts = tuple(bounds[l] + 1 for l in range(K))
    sizes = tuple(bounds[l + 1] - bounds[l] for l in range(K))
    return BlockPartition(n=n, K=K, starts=starts, sizes=sizes)
