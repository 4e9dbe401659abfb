"""Exact Fourier-space evaluation of the advective product (u . grad) v.

(u . grad v)^(r) = sum_{p + q = r} i (uhat(p) . kappa_q) vhat(q)
"""
from __future__ import annotations

import numpy as np

from ..errors import ResolutionError, SpecMismatchError
from ..spectral import SpectralField
from ..spectral.torus import decode, encode, lookup

_CHUNK = 4_000_000  # pair budget per vectorised block


def _scatter(out_idx: np.ndarray, contrib: np.ndarray, size: int) -> np.ndarray:
    res = np.empty((size, 3), dtype=complex)
    for c in range(3):
        res[:, c] = (np.bincount(out_idx, weights=contrib[:, c].real, minlength=size)
                     + 1j * np.bincount(out_idx, weights=contrib[:, c].imag, minlength=size))
    return res


def convective_product(u: SpectralField, v: SpectralField, out_modes: np.ndarray | None = None,
                       max_modes: int | None = None) -> SpectralField:
    """Direct pairwise convolution for (u . grad) v.

    With ``out_modes`` the result is restricted to that set; otherwise every
    Minkowski-sum mode is returned. ``max_modes`` caps the output size.
    """
    if u.torus.L != v.torus.L:
        raise SpecMismatchError("fields live on different tori")
    torus = u.torus
    if not len(u) or not len(v):
        if out_modes is not None:
            return SpectralField(torus, out_modes, np.zeros((len(out_modes), 3), complex))
        return SpectralField.zeros(torus)
    kv = v.kappa
    out_keys = None if out_modes is None else encode(out_modes)
    if out_keys is not None:
        order = np.argsort(out_keys)
        out_keys, out_modes = out_keys[order], np.asarray(out_modes)[order]
    key_chunks, val_chunks = [], []
    rows = max(1, _CHUNK // max(len(v), 1))
    for s in range(0, len(u), rows):
        up, uc = u.modes[s:s + rows], u.coeffs[s:s + rows]
        factor = 1j * (uc @ kv.T)  # (rows, nv)
        sums = (up[:, None, :] + v.modes[None, :, :]).reshape(-1, 3)
        keys = encode(sums)
        contrib = (factor[:, :, None] * v.coeffs[None, :, :]).reshape(-1, 3)
        if out_keys is not None:
            idx = lookup(out_keys, keys)
            hit = idx >= 0
            key_chunks.append(idx[hit])
            val_chunks.append(contrib[hit])
        else:
            key_chunks.append(keys)
            val_chunks.append(contrib)
    keys = np.concatenate(key_chunks)
    vals = np.concatenate(val_chunks)
    if out_keys is not None:
        return SpectralField(torus, out_modes, _scatter(keys, vals, len(out_keys)))
    uniq, inv = np.unique(keys, return_inverse=True)
    if max_modes is not None and uniq.size > max_modes:
        raise ResolutionError(f"product support {uniq.size} exceeds the cap of {max_modes} modes")
    return SpectralField(torus, decode(uniq), _scatter(inv, vals, uniq.size))


class TriadTable:
    """Precomputed interacting pairs for repeated products on fixed mode sets.

    Evaluates (a . grad) b restricted to ``out_modes`` for coefficient arrays
    living on ``a_modes`` and ``b_modes``.
    """

    def __init__(self, torus, a_modes: np.ndarray, b_modes: np.ndarray, out_modes: np.ndarray):
        self.torus = torus
        self.a_modes = np.asarray(a_modes)
        self.b_modes = np.asarray(b_modes)
        self.out_modes = np.asarray(out_modes)
        out_keys = encode(self.out_modes)
        if np.any(np.diff(out_keys) <= 0):
            raise ValueError("out_modes must be sorted by key and unique")
        ia, ib, io = [], [], []
        rows = max(1, _CHUNK // max(len(self.b_modes), 1))
        for s in range(0, len(self.a_modes), rows):
            sums = self.a_modes[s:s + rows, None, :] + self.b_modes[None, :, :]
            idx = lookup(out_keys, encode(sums.reshape(-1, 3))).reshape(sums.shape[:2])
            r, c = np.nonzero(idx >= 0)
            ia.append(r + s)
            ib.append(c)
            io.append(idx[r, c])
        self.ia = np.concatenate(ia) if ia else np.zeros(0, np.int64)
        self.ib = np.concatenate(ib) if ib else np.zeros(0, np.int64)
        self.io = np.concatenate(io) if io else np.zeros(0, np.int64)
        self.kb = torus.kappa(self.b_modes)

    def __len__(self) -> int:
        return self.ia.size

    def apply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        factor = 1j * np.einsum("ij,ij->i", a[self.ia], self.kb[self.ib])
        return _scatter(self.io, factor[:, None] * b[self.ib], len(self.out_modes))
