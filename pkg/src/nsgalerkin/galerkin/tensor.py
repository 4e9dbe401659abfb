"""Sparse trilinear coefficients a_{i,m,k} = int (w_i . grad w_m) . w_k dx."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..spectral import BasisSpec
from ..spectral.torus import encode, is_canonical, lookup


@dataclass(eq=False)
class TrilinearTensor:
    """COO storage of the nonzero a_{i,m,k}, sorted by (i, m, k)."""

    n: int
    i: np.ndarray
    m: np.ndarray
    k: np.ndarray
    value: np.ndarray

    @property
    def nnz(self) -> int:
        return self.value.size

    def _flat(self, i, m, k) -> np.ndarray:
        n = np.int64(self.n)
        return (i.astype(np.int64) * n + m) * n + k

    def get(self, i, m, k) -> np.ndarray:
        """Entries at arbitrary index triples (0 where structurally absent)."""
        flat = self._flat(np.asarray(i), np.asarray(m), np.asarray(k))
        idx = lookup(self._flat(self.i, self.m, self.k), flat)
        return np.where(idx >= 0, self.value[np.maximum(idx, 0)], 0.0)

    def skew_defect(self) -> float:
        """max |a_{i,m,k} + a_{i,k,m}| over stored entries."""
        if not self.nnz:
            return 0.0
        return float(np.abs(self.value + self.get(self.i, self.k, self.m)).max())

    def contract(self, g: np.ndarray) -> np.ndarray:
        """N_k = sum_{i,m} a_{i,m,k} g_i g_m."""
        g = np.asarray(g, dtype=float)
        return np.bincount(self.k, weights=self.value * g[self.i] * g[self.m], minlength=self.n)

    def cubic_form(self, g: np.ndarray) -> tuple[float, float]:
        """(sum a g g g, sum |a g g g|); the second is the natural scale for relative checks."""
        g = np.asarray(g, dtype=float)
        terms = self.value * g[self.i] * g[self.m] * g[self.k]
        return float(terms.sum()), float(np.abs(terms).sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "m", "k", "value"])
            for row in zip(self.i.tolist(), self.m.tolist(), self.k.tolist(), self.value.tolist()):
                w.writerow([row[0], row[1], row[2], repr(row[3])])

    @classmethod
    def from_csv(cls, path, n: int) -> "TrilinearTensor":
        data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float, ndmin=2)
        if data.size == 0:
            z = np.zeros(0, np.int64)
            return cls(n, z, z, z, np.zeros(0))
        idx = data[:, :3].astype(np.int64)
        return cls(n, idx[:, 0], idx[:, 1], idx[:, 2], data[:, 3])


def mode_triads(basis: BasisSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Indices (p, q, r) into basis.modes with p + q = r and p canonical."""
    modes = basis.modes
    keys = basis.mode_keys
    canon = np.nonzero(is_canonical(modes))[0]
    sums = modes[canon][:, None, :] + modes[None, :, :]
    idx = lookup(keys, encode(sums.reshape(-1, 3))).reshape(sums.shape[:2])
    a, b = np.nonzero(idx >= 0)
    return canon[a], b, idx[a, b]


@dataclass(eq=False)
class BlockTensor:
    """The trilinear coefficients grouped by basis pairs.

    ``blocks[g, a, b, c]`` is a_{4P+a, 4Q+b, 4R+c} for the pair triple
    (P, Q, R) = (P[g], Q[g], R[g]); triples are sorted and unique, and
    entries whose index falls outside the basis are zero.
    """

    n: int
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    blocks: np.ndarray
    n_pairs: int

    def _keys(self, P, Q, R) -> np.ndarray:
        npairs = np.int64(self.n_pairs)
        return (P.astype(np.int64) * npairs + Q) * npairs + R

    def skew_defect(self) -> float:
        """max |a_{i,m,k} + a_{i,k,m}|, pairing each block with its (P, R, Q) partner."""
        if not len(self.P):
            return 0.0
        idx = lookup(self._keys(self.P, self.Q, self.R), self._keys(self.P, self.R, self.Q))
        partner = np.where((idx >= 0)[:, None, None, None],
                           self.blocks[np.maximum(idx, 0)].transpose(0, 1, 3, 2), 0.0)
        return float(np.abs(self.blocks + partner).max())

    def cubic_forms(self, G: np.ndarray, chunk: int = 128) -> tuple[np.ndarray, np.ndarray]:
        """Batched ``TrilinearTensor.cubic_form`` for the columns of G (shape (n, B))."""
        G = np.asarray(G, dtype=float)
        if G.ndim == 1:
            G = G[:, None]
        B = G.shape[1]
        padded = np.zeros((4 * self.n_pairs, B))
        padded[:self.n] = G
        Gb = padded.reshape(self.n_pairs, 4, B)
        A = self.blocks.reshape(-1, 4, 16)
        total = np.zeros(B)
        scale = np.zeros(B)
        for s in range(0, len(self.P), chunk):
            sl = slice(s, s + chunk)
            gp, gq, gr = Gb[self.P[sl]], Gb[self.Q[sl]], Gb[self.R[sl]]
            outer = (gq[:, :, None, :] * gr[:, None, :, :]).reshape(-1, 16, B)
            t = A[sl] @ outer
            t *= gp
            total += t.sum(axis=(0, 1))
            # |a g g g| = |a| |g| |g| |g| term by term
            np.abs(outer, out=outer)
            t = np.abs(A[sl]) @ outer
            t *= np.abs(gp)
            scale += t.sum(axis=(0, 1))
        return total, scale

    def to_coo(self) -> TrilinearTensor:
        n = self.n
        if not len(self.P):
            z = np.zeros(0, np.int64)
            return TrilinearTensor(n, z, z, z, np.zeros(0))
        loc = np.arange(4)
        shape = self.blocks.shape
        ii = np.broadcast_to(4 * self.P[:, None, None, None] + loc[:, None, None], shape).ravel()
        mm = np.broadcast_to(4 * self.Q[:, None, None, None] + loc[:, None], shape).ravel()
        kk = np.broadcast_to(4 * self.R[:, None, None, None] + loc, shape).ravel()
        vv = self.blocks.ravel()
        keep = vv != 0.0
        ii, mm, kk, vv = ii[keep], mm[keep], kk[keep], vv[keep]
        # flat keys are unique, so one argsort gives the (i, m, k) order
        order = np.argsort((ii * np.int64(n) + mm) * n + kk)
        return TrilinearTensor(n, ii[order], mm[order], kk[order], vv[order])


def assemble_trilinear(basis: BasisSpec) -> TrilinearTensor:
    """Sparse COO form of ``assemble_blocks``."""
    return assemble_blocks(basis).to_coo()


def assemble_blocks(basis: BasisSpec) -> BlockTensor:
    """Closed-form assembly from mode-level triads.

    A triad p + q = r contributes, for functions of the pairs owning p, q, r,
        L^3 c^3 i alpha_i(p) alpha_m(q) conj(alpha_k(r)) (eps_i . kappa_q)(eps_m . eps_k)
    where alpha = 1/2 (cos) or -i s/2 (sin, s = sign of the mode). The negated
    triad adds the complex conjugate, so only canonical p are enumerated and
    twice the real part is kept.
    """
    n = basis.n
    modes = basis.modes
    p, q, r = mode_triads(basis)
    npairs = len(basis.pairs)
    if p.size == 0:
        z = np.zeros(0, np.int64)
        return BlockTensor(n, z, z, z, np.zeros((0, 4, 4, 4)), npairs)

    pair_keys = encode(basis.pairs)
    by_key = np.argsort(pair_keys)
    canon = is_canonical(modes)
    sign = np.where(canon, 1, -1)
    rep = modes * sign[:, None]
    pair_of = by_key[lookup(pair_keys[by_key], encode(rep))]

    P, Q, R = pair_of[p], pair_of[q], pair_of[r]
    sq, sr = sign[q], sign[r]
    kq = basis.torus.kappa(modes[q])

    # phase factors alpha for (cos, sin) at sign s
    def alpha(s):
        return np.stack([np.full(s.shape, 0.5 + 0j), -0.5j * s], axis=-1)

    a_i = alpha(np.ones_like(sq))
    a_m = alpha(sq)
    a_k = alpha(sr).conj()
    phase = a_i[:, :, None, None] * a_m[:, None, :, None] * a_k[:, None, None, :]
    # 2 Re(i * phase) = -2 Im(phase)
    phase_part = -2.0 * phase.imag  # (N, phi_i, phi_m, phi_k)

    eps = basis.eps
    dot_i = np.einsum("nac,nc->na", eps[P], kq)  # (N, a_i)
    dot_mk = np.einsum("nac,nbc->nab", eps[Q], eps[R])  # (N, a_m, a_k)
    pol_part = dot_i[:, :, None, None] * dot_mk[:, None, :, :]  # (N, a_i, a_m, a_k)

    const = basis.torus.volume * basis.norm_const ** 3
    # axis order per slot: (pol, phase) -> local index 2*pol + phase
    block = const * np.einsum("nxyz,nabc->naxbycz", phase_part, pol_part).reshape(-1, 4, 4, 4)

    group_key = (P.astype(np.int64) * npairs + Q) * npairs + R
    order = np.argsort(group_key, kind="stable")
    gk = group_key[order]
    starts = np.r_[0, np.nonzero(np.diff(gk))[0] + 1]
    summed = np.add.reduceat(block[order], starts, axis=0)
    G = gk[starts]
    gP = G // (npairs ** 2)
    gQ = (G // npairs) % npairs
    gR = G % npairs

    # zero the slots of functions cut off by a partial last pair
    loc = np.arange(4)
    summed[(4 * gP[:, None] + loc >= n)[:, :, None, None]
           | (4 * gQ[:, None] + loc >= n)[:, None, :, None]
           | (4 * gR[:, None] + loc >= n)[:, None, None, :]] = 0.0
    return BlockTensor(n, gP, gQ, gR, summed, npairs)
