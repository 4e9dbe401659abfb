"""Sparse Fourier representation of real 3-vector fields on a torus.

A field is u(x) = sum_k uhat(k) exp(i kappa_k . x) with kappa_k = 2 pi k / L.
Coefficients are stored as a sorted table of integer wave-vectors and complex
3-vectors; absent modes are zero.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ResolutionError, SpecMismatchError
from .torus import TorusSpec, decode, encode, lookup

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class SpectralField:
    torus: TorusSpec
    modes: np.ndarray
    coeffs: np.ndarray
    keys: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=np.int64).reshape(-1, 3)
        coeffs = np.asarray(self.coeffs, dtype=np.complex128).reshape(-1, 3)
        if modes.shape[0] != coeffs.shape[0]:
            raise ValueError("modes and coeffs differ in length")
        keys = encode(modes)
        order = np.argsort(keys, kind="stable")
        keys, modes, coeffs = keys[order], modes[order], coeffs[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            uniq, inv = np.unique(keys, return_inverse=True)
            summed = np.zeros((uniq.size, 3), dtype=np.complex128)
            np.add.at(summed, inv, coeffs)
            keys, coeffs, modes = uniq, summed, decode(uniq)
        modes.setflags(write=False)
        coeffs.setflags(write=False)
        keys.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "keys", keys)

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, torus: TorusSpec) -> "SpectralField":
        return cls(torus, np.zeros((0, 3), np.int64), np.zeros((0, 3), complex))

    @classmethod
    def from_dict(cls, torus: TorusSpec, data: dict) -> "SpectralField":
        if not data:
            return cls.zeros(torus)
        modes = np.array(list(data.keys()), dtype=np.int64)
        coeffs = np.array([np.asarray(v, dtype=complex) for v in data.values()])
        return cls(torus, modes, coeffs)

    @classmethod
    def from_grid(cls, torus: TorusSpec, values: np.ndarray, band: int | None = None,
                  drop_tol: float = 0.0) -> "SpectralField":
        """Transform a (3, G, G, G) real array sampled at x_j = j L / G.

        Keeps modes with every |k_i| < G/2 (and <= band when given).
        """
        values = np.asarray(values, dtype=float)
        G = values.shape[-1]
        if values.shape != (3, G, G, G):
            raise ValueError(f"expected (3, G, G, G) array, got {values.shape}")
        hat = np.fft.fftn(values, axes=(1, 2, 3)) / G ** 3
        k1d = np.fft.fftfreq(G, 1.0 / G).astype(np.int64)
        limit = G // 2 - 1 if band is None else min(int(band), G // 2 - 1)
        sel = np.nonzero(np.abs(k1d) <= limit)[0]
        sub = hat[:, sel][:, :, sel][:, :, :, sel]
        kk = np.stack(np.meshgrid(k1d[sel], k1d[sel], k1d[sel], indexing="ij"), axis=-1).reshape(-1, 3)
        coeffs = sub.reshape(3, -1).T
        if drop_tol >= 0:
            scale = np.abs(coeffs).max() if coeffs.size else 0.0
            keep = np.abs(coeffs).max(axis=1) > drop_tol * scale
            kk, coeffs = kk[keep], coeffs[keep]
        return cls(torus, kk, coeffs)

    # basic queries ------------------------------------------------------
    def __len__(self) -> int:
        return self.modes.shape[0]

    @property
    def band(self) -> int:
        """Largest absolute wave-vector component present."""
        return int(np.abs(self.modes).max()) if len(self) else 0

    @property
    def kappa(self) -> np.ndarray:
        return self.torus.kappa(self.modes)

    def coefficient(self, k) -> np.ndarray:
        idx = lookup(self.keys, encode(np.asarray(k)))[0]
        return self.coeffs[idx].copy() if idx >= 0 else np.zeros(3, complex)

    def to_dict(self) -> dict:
        return {tuple(int(c) for c in k): v.copy() for k, v in zip(self.modes, self.coeffs)}

    def restrict(self, modes: np.ndarray) -> np.ndarray:
        """Coefficients on an arbitrary mode list (zeros where absent)."""
        idx = lookup(self.keys, encode(modes))
        out = np.zeros((idx.size, 3), dtype=complex)
        hit = idx >= 0
        out[hit] = self.coeffs[idx[hit]]
        return out

    def on_modes(self, modes: np.ndarray) -> "SpectralField":
        return SpectralField(self.torus, modes, self.restrict(modes))

    def truncate(self, band: int) -> "SpectralField":
        keep = np.abs(self.modes).max(axis=1) <= band if len(self) else np.zeros(0, bool)
        return SpectralField(self.torus, self.modes[keep], self.coeffs[keep])

    def prune(self, tol: float = 0.0) -> "SpectralField":
        """Drop modes whose largest coefficient magnitude is <= tol."""
        keep = np.abs(self.coeffs).max(axis=1) > tol if len(self) else np.zeros(0, bool)
        return SpectralField(self.torus, self.modes[keep], self.coeffs[keep])

    def without_mean(self) -> "SpectralField":
        keep = np.any(self.modes != 0, axis=1)
        return SpectralField(self.torus, self.modes[keep], self.coeffs[keep])

    def mean_mode(self) -> np.ndarray:
        return self.coefficient((0, 0, 0))

    def is_hermitian(self, tol: float = 0.0) -> bool:
        """uhat(-k) == conj(uhat(k)) for every k, to absolute tolerance tol."""
        if not len(self):
            return True
        partner = self.restrict(-self.modes)
        scale = max(np.abs(self.coeffs).max(), 1e-300)
        return bool(np.abs(partner - self.coeffs.conj()).max() <= tol * scale)

    def hermitian_part(self) -> "SpectralField":
        """Symmetrise so that the represented field is exactly real."""
        modes = np.concatenate([self.modes, -self.modes])
        coeffs = np.concatenate([self.coeffs, self.coeffs.conj()]) / 2
        return SpectralField(self.torus, modes, coeffs)

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "SpectralField"):
        if other.torus.L != self.torus.L:
            raise SpecMismatchError(f"torus periods differ: {self.torus.L} vs {other.torus.L}")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.torus, np.concatenate([self.modes, other.modes]),
                             np.concatenate([self.coeffs, other.coeffs]))

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self + (-other)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.torus, self.modes, -self.coeffs)

    def __mul__(self, s) -> "SpectralField":
        return SpectralField(self.torus, self.modes, self.coeffs * s)

    __rmul__ = __mul__

    def __truediv__(self, s) -> "SpectralField":
        return SpectralField(self.torus, self.modes, self.coeffs / s)

    def map_coeffs(self, fn) -> "SpectralField":
        return SpectralField(self.torus, self.modes, fn(self.modes, self.coeffs))

    # grid transforms ----------------------------------------------------
    def to_grid(self, G: int | None = None) -> np.ndarray:
        """Real values on the G^3 grid, shape (3, G, G, G)."""
        G = self.torus.G if G is None else int(G)
        if len(self) and self.band >= G // 2:
            raise ResolutionError(f"band {self.band} not representable on a {G}^3 grid")
        arr = np.zeros((3, G, G, G), dtype=complex)
        if len(self):
            idx = np.mod(self.modes, G)
            arr[:, idx[:, 0], idx[:, 1], idx[:, 2]] = self.coeffs.T
        return np.real(np.fft.ifftn(arr, axes=(1, 2, 3))) * G ** 3

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Direct Fourier summation at arbitrary points, shape (npts, 3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not len(self):
            return np.zeros((pts.shape[0], 3))
        phase = np.exp(1j * pts @ self.kappa.T)
        return np.real(phase @ self.coeffs)

    # serialization ------------------------------------------------------
    def to_json_dict(self) -> dict:
        body = {}
        for k, c in zip(self.modes, self.coeffs):
            body[f"{k[0]},{k[1]},{k[2]}"] = [float(x) for pair in zip(c.real, c.imag) for x in pair]
        return {"format_version": FORMAT_VERSION, "L": self.torus.L, "G": self.torus.G, "modes": body}

    @classmethod
    def from_json_dict(cls, data: dict) -> "SpectralField":
        if data.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format version {data.get('format_version')!r}")
        torus = TorusSpec(float(data["L"]), int(data.get("G", 32)))
        body = data["modes"]
        if not body:
            return cls.zeros(torus)
        modes = np.array([[int(s) for s in key.split(",")] for key in body], dtype=np.int64)
        vals = np.array(list(body.values()), dtype=float).reshape(-1, 3, 2)
        return cls(torus, modes, vals[..., 0] + 1j * vals[..., 1])

    def to_json(self) -> str:
        # repr-based float output is the shortest string that round-trips exactly
        return json.dumps(self.to_json_dict(), allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "SpectralField":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class RealGridField:
    """Samples of a real 3-vector field on the torus oracle grid."""

    torus: TorusSpec
    values: np.ndarray

    @classmethod
    def from_spectral(cls, u: SpectralField, G: int | None = None) -> "RealGridField":
        G = u.torus.G if G is None else G
        return cls(u.torus.with_grid(G), u.to_grid(G))

    def to_spectral(self, band: int | None = None) -> SpectralField:
        return SpectralField.from_grid(self.torus, self.values, band=band)


def random_field(torus: TorusSpec, modes: np.ndarray, rng: np.random.Generator,
                 solenoidal: bool = True, scale: float = 1.0) -> SpectralField:
    """Random real field supported on +-modes (the zero mode is skipped)."""
    modes = np.asarray(modes, dtype=np.int64).reshape(-1, 3)
    modes = modes[np.any(modes != 0, axis=1)]
    c = (rng.standard_normal((len(modes), 3)) + 1j * rng.standard_normal((len(modes), 3))) * scale
    u = SpectralField(torus, modes, c).hermitian_part()
    if solenoidal:
        from .ops import leray_project
        u = leray_project(u)
    return u
