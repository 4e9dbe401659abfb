"""Periodic box geometry and integer wave-vector bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# keys pack an integer triple into one int64; components must stay in [-OFFSET, OFFSET)
_OFFSET = 1 << 20
_WIDTH = 1 << 21


@dataclass(frozen=True)
class TorusSpec:
    """Cubic torus [0, L)^3 with an oracle quadrature grid of G points per axis."""

    L: float = 2 * math.pi
    G: int = 32

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"torus period L must be positive, got {self.L}")
        G = int(self.G)
        if G < 4 or G & (G - 1):
            raise ValueError(f"grid resolution G must be a power of two >= 4, got {self.G}")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "L", float(self.L))

    @property
    def volume(self) -> float:
        return self.L ** 3

    @property
    def dk(self) -> float:
        """Physical wavenumber of the k=(1,0,0) mode."""
        return 2 * math.pi / self.L

    def kappa(self, modes: np.ndarray) -> np.ndarray:
        return np.asarray(modes, dtype=float) * self.dk

    def with_grid(self, G: int) -> "TorusSpec":
        return TorusSpec(self.L, G)

    def grid_points(self, centered: bool = False) -> np.ndarray:
        """Coordinates of the G uniformly spaced points along one axis."""
        x = np.arange(self.G) * (self.L / self.G)
        if centered:
            x = (x + self.L / 2) % self.L - self.L / 2
        return x


def encode(modes: np.ndarray) -> np.ndarray:
    """Sortable int64 key of each integer triple; key order is lexicographic order."""
    m = np.asarray(modes, dtype=np.int64).reshape(-1, 3)
    if m.size and (m.min() < -_OFFSET or m.max() >= _OFFSET):
        raise OverflowError("wave-vector component out of encodable range")
    return ((m[:, 0] + _OFFSET) * _WIDTH + (m[:, 1] + _OFFSET)) * _WIDTH + (m[:, 2] + _OFFSET)


def decode(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    k3 = keys % _WIDTH - _OFFSET
    rest = keys // _WIDTH
    k2 = rest % _WIDTH - _OFFSET
    k1 = rest // _WIDTH - _OFFSET
    return np.stack([k1, k2, k3], axis=-1)


def is_canonical(modes: np.ndarray) -> np.ndarray:
    """True where the first nonzero component is positive (one representative per +-k pair)."""
    m = np.asarray(modes).reshape(-1, 3)
    first = np.where(m[:, 0] != 0, m[:, 0], np.where(m[:, 1] != 0, m[:, 1], m[:, 2]))
    return first > 0


def ball_modes(K: float, include_zero: bool = False) -> np.ndarray:
    """All integer triples with |k| <= K, lexicographically sorted."""
    R = int(math.floor(K))
    r = np.arange(-R, R + 1)
    grid = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    n2 = (grid ** 2).sum(axis=1)
    keep = n2 <= K * K + 1e-9
    if not include_zero:
        keep &= n2 > 0
    return grid[keep]


def lookup(sorted_keys: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Index of each key in sorted_keys, or -1 where absent."""
    keys = np.asarray(keys, dtype=np.int64)
    if sorted_keys.size == 0:
        return np.full(keys.shape, -1, dtype=np.int64)
    pos = np.searchsorted(sorted_keys, keys)
    pos_c = np.minimum(pos, sorted_keys.size - 1)
    found = sorted_keys[pos_c] == keys
    return np.where(found, pos_c, -1)
