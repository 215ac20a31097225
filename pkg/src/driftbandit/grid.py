"""Dyadic discretization of the context space [0,1]^d.

The context space is covered, at every level m >= 0, by a regular grid of
2^(m*d) axis-aligned hypercubes ("bins") of side 2^-m.  Cells are half-open
[k/2^m, (k+1)/2^m) except along the upper boundary, where the last cell is
closed so the grid is a true partition of [0,1]^d.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "BinId",
    "level_for",
    "bin_of",
    "parent",
    "contains",
    "ancestors",
    "bin_mass",
    "context_grid_coords",
]


@dataclass(frozen=True)
class BinId:
    """Address of one bin: level index m (side 2^-m) and integer coords."""

    m: int
    coords: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError(f"level index must be >= 0, got {self.m}")
        top = 1 << self.m
        for c in self.coords:
            if not (0 <= c < top):
                raise ValueError(f"coordinate {c} out of range for level {self.m}")

    @property
    def side(self) -> float:
        # exact in binary floating point for m <= 52
        return 2.0 ** -self.m

    @property
    def d(self) -> int:
        return len(self.coords)

    def lower(self) -> tuple[float, ...]:
        return tuple(c * self.side for c in self.coords)

    def upper(self) -> tuple[float, ...]:
        return tuple((c + 1) * self.side for c in self.coords)


def level_for(n: int, K: int, d: int) -> int:
    """Level index m for a window of n rounds with K arms in dimension d.

    Returns the smallest m >= 0 with 2^-m <= (K/n)^(1/(2+d)), i.e. the
    finest grid whose side is still no smaller than the bias a window of n
    rounds can afford.  Decided by the exact integer test
    K * 2^(m*(2+d)) >= n, which avoids float boundary errors at powers of
    two.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    if d < 0:
        raise ValueError(f"d must be >= 0, got {d}")
    m = 0
    step = 2 + d
    while (K << (m * step)) < n:
        m += 1
    return m


def bin_of(x: Sequence[float], m: int) -> BinId:
    """Bin at level m containing context x (boundary 1.0 clamps inward)."""
    top = (1 << m) - 1
    coords = []
    for xi in x:
        if not (0.0 <= xi <= 1.0):
            raise ValueError(f"context coordinate {xi} outside [0,1]")
        coords.append(min(int(xi * (1 << m)), top))
    return BinId(m, tuple(coords))


def parent(b: BinId) -> BinId:
    """Containing bin one level up; the root bin has no parent."""
    if b.m == 0:
        raise ValueError("root bin has no parent")
    return BinId(b.m - 1, tuple(c >> 1 for c in b.coords))


def contains(b: BinId, x: Sequence[float]) -> bool:
    return bin_of(x, b.m).coords == b.coords


def ancestors(b: BinId) -> list[BinId]:
    """Chain [b, parent(b), ..., root], length b.m + 1."""
    chain = [b]
    while chain[-1].m > 0:
        chain.append(parent(chain[-1]))
    return chain


def bin_mass(b: BinId, d: int | None = None) -> float:
    """Mass of a bin under the uniform marginal on [0,1]^d: exactly r^d."""
    if d is None:
        d = b.d
    return 2.0 ** (-b.m * d)


def context_grid_coords(contexts: np.ndarray, m_max: int) -> np.ndarray:
    """Integer grid coordinates of each context at the finest level m_max.

    The bin of row t at any level m <= m_max is recovered by the shift
    coords[t] >> (m_max - m); this is the hot path used by the run loops.
    """
    contexts = np.asarray(contexts, dtype=float)
    if contexts.ndim == 1:
        contexts = contexts[:, None]
    scale = 1 << m_max
    g = np.floor(contexts * scale).astype(np.int64)
    np.clip(g, 0, scale - 1, out=g)
    return g


def iter_bins(m: int, d: int) -> Iterator[BinId]:
    """All 2^(m*d) bins of level m, in lexicographic order."""
    for flat in range(1 << (m * d)):
        coords = []
        rest = flat
        for _ in range(d):
            coords.append(rest & ((1 << m) - 1))
            rest >>= m
        yield BinId(m, tuple(coords))
