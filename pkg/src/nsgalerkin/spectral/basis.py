"""Real divergence-free Fourier basis (torus eigenfunctions of the Stokes operator).

Each +-k pair contributes four orthonormal real functions

    sqrt(2/L^3) cos(kappa . x) eps_a,   sqrt(2/L^3) sin(kappa . x) eps_a,   a = 1, 2

with eps_1 = normalize(k x a), eps_2 = normalize(k x (k x a)). Each one solves
Lap w = -|kappa|^2 w with zero pressure.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .field import SpectralField
from .torus import TorusSpec, ball_modes, encode, is_canonical

COS, SIN = 0, 1


def polarizations(k) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized integer polarization vectors (both exactly orthogonal to k)."""
    k = np.asarray(k, dtype=np.int64)
    a = np.array([0, 1, 0]) if k[0] == 0 and k[1] == 0 else np.array([0, 0, 1])
    e1 = np.cross(k, a)
    e2 = np.cross(k, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Ordered real basis: |k|^2, then lexicographic representative k, then (polarization, phase)."""

    torus: TorusSpec
    K: float
    n: int | None = None
    pairs: np.ndarray = field(init=False, repr=False)
    eps: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"basis radius K must be >= 1, got {self.K}")
        m = ball_modes(self.K)
        m = m[is_canonical(m)]
        n2 = (m ** 2).sum(axis=1)
        order = np.lexsort((m[:, 2], m[:, 1], m[:, 0], n2))
        pairs = m[order]
        total = 4 * len(pairs)
        n = total if self.n is None else int(self.n)
        if not 1 <= n <= total:
            raise ValueError(f"basis size n must lie in [1, {total}], got {self.n}")
        pairs = pairs[: (n + 3) // 4]
        eps = np.empty((len(pairs), 2, 3))
        for i, k in enumerate(pairs):
            e1, e2 = polarizations(k)
            eps[i, 0] = e1 / np.linalg.norm(e1)
            eps[i, 1] = e2 / np.linalg.norm(e2)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "eps", eps)

    def __len__(self) -> int:
        return self.n

    # per-function descriptors -------------------------------------------
    @cached_property
    def pair_index(self) -> np.ndarray:
        return np.arange(self.n) // 4

    @cached_property
    def pol_index(self) -> np.ndarray:
        return (np.arange(self.n) % 4) // 2

    @cached_property
    def phase_index(self) -> np.ndarray:
        return np.arange(self.n) % 2

    @cached_property
    def wavevectors(self) -> np.ndarray:
        return self.pairs[self.pair_index]

    @cached_property
    def polarization(self) -> np.ndarray:
        return self.eps[self.pair_index, self.pol_index]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """lambda_k = |kappa_k|^2."""
        return (self.torus.kappa(self.wavevectors) ** 2).sum(axis=1)

    @property
    def norm_const(self) -> float:
        return float(np.sqrt(2.0 / self.torus.volume))

    # mode set -----------------------------------------------------------
    @cached_property
    def modes(self) -> np.ndarray:
        """Sorted +-k modes touched by the basis."""
        used = self.pairs[np.unique(self.pair_index)]
        m = np.concatenate([used, -used])
        return m[np.argsort(encode(m))]

    @cached_property
    def mode_keys(self) -> np.ndarray:
        return encode(self.modes)

    @cached_property
    def synthesis(self) -> sp.csr_matrix:
        """Sparse (3*|modes|, n) complex map g -> flattened coefficient array."""
        c = self.norm_const
        rows, cols, vals = [], [], []
        pos_plus = np.searchsorted(self.mode_keys, encode(self.wavevectors))
        pos_minus = np.searchsorted(self.mode_keys, encode(-self.wavevectors))
        for j in range(self.n):
            e = self.polarization[j]
            alpha = 0.5 if self.phase_index[j] == COS else -0.5j
            for pos, a in ((pos_plus[j], alpha), (pos_minus[j], np.conj(alpha))):
                for comp in range(3):
                    if e[comp] != 0.0:
                        rows.append(3 * pos + comp)
                        cols.append(j)
                        vals.append(c * a * e[comp])
        return sp.csr_matrix((vals, (rows, cols)), shape=(3 * len(self.modes), self.n), dtype=complex)

    @cached_property
    def analysis(self) -> sp.csr_matrix:
        """Sparse (n, 3*|modes|) map: coefficient array -> <field, w_k> (before taking Re)."""
        return (self.synthesis.conj().T * self.torus.volume).tocsr()

    def coeff_array(self, g: np.ndarray) -> np.ndarray:
        """Complex coefficients (|modes|, 3) of sum_k g_k w_k."""
        return (self.synthesis @ np.asarray(g, dtype=float)).reshape(-1, 3)

    def to_field(self, g: np.ndarray) -> SpectralField:
        return SpectralField(self.torus, self.modes, self.coeff_array(g))

    def function(self, j: int) -> SpectralField:
        g = np.zeros(self.n)
        g[j] = 1.0
        return self.to_field(g)

    def project_array(self, coeffs: np.ndarray) -> np.ndarray:
        """<F, w_k> for F given on self.modes as a (|modes|, 3) array."""
        return np.real(self.analysis @ np.asarray(coeffs).reshape(-1))

    def project(self, f: SpectralField) -> np.ndarray:
        """Galerkin coefficients <f, w_k>, k = 1..n."""
        return self.project_array(f.restrict(self.modes))

    def truncated(self, n: int) -> "BasisSpec":
        return BasisSpec(self.torus, self.K, n)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.torus.L, self.K, self.n)).encode())
        h.update(np.ascontiguousarray(self.wavevectors).tobytes())
        return h.hexdigest()[:16]
