"""Linear spectral operators: Leray projection, Stokes solve, norms."""
from __future__ import annotations

import numpy as np

from ..errors import SpecMismatchError
from .field import SpectralField


def _k2(modes: np.ndarray) -> np.ndarray:
    return (modes.astype(np.int64) ** 2).sum(axis=1)


def leray_project(v: SpectralField) -> SpectralField:
    """Remove the gradient part: uhat - k (k . uhat) / |k|^2 on every nonzero mode.

    The mean mode (if present) is passed through untouched.
    """
    def apply(modes, coeffs):
        k = modes.astype(float)
        n2 = _k2(modes).astype(float)
        safe = np.where(n2 > 0, n2, 1.0)
        proj = coeffs - k * ((coeffs * k).sum(axis=1) / safe)[:, None]
        return np.where((n2 > 0)[:, None], proj, coeffs)

    return v.map_coeffs(apply)


def gradient_decompose(v: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Split v = P v + grad g; returns (P v, grad g)."""
    pv = leray_project(v)
    grad = SpectralField(v.torus, v.modes, v.coeffs - pv.restrict(v.modes))
    return pv, grad


def divergence(v: SpectralField) -> np.ndarray:
    """Fourier coefficients of div v on v's modes (scalar per mode)."""
    return 1j * (v.coeffs * v.kappa).sum(axis=1)


def laplacian(v: SpectralField) -> SpectralField:
    k2 = (v.kappa ** 2).sum(axis=1)
    return v.map_coeffs(lambda m, c: -k2[:, None] * c)


def gradient_scalar(torus, modes, phat) -> SpectralField:
    """grad of a scalar field given by coefficients phat on modes."""
    modes = np.asarray(modes)
    return SpectralField(torus, modes, 1j * torus.kappa(modes) * np.asarray(phat)[:, None])


def stokes_solve(f: SpectralField) -> SpectralField:
    """Solve -Lap v + grad p = f, div v = 0 on the torus and return v.

    The pressure gradient is f - P f (see ``gradient_decompose``). The mean
    mode of f must vanish.
    """
    if np.any(np.abs(f.mean_mode()) > 0):
        raise ValueError("Stokes problem needs a mean-free forcing (nonzero k=0 mode)")
    f = f.without_mean()
    pf = leray_project(f)
    k2 = (pf.kappa ** 2).sum(axis=1)
    return pf.map_coeffs(lambda m, c: c / k2[:, None])


def inner_product(a: SpectralField, b: SpectralField) -> float:
    """L^2 inner product via Parseval: L^3 sum_k a(k) . conj(b(k))."""
    if a.torus.L != b.torus.L:
        raise SpecMismatchError(f"torus periods differ: {a.torus.L} vs {b.torus.L}")
    if not len(a) or not len(b):
        return 0.0
    bc = b.restrict(a.modes)
    return float(np.real(np.sum(a.coeffs * bc.conj()))) * a.torus.volume


def l2_norm(v: SpectralField) -> float:
    return float(np.sqrt(max(inner_product(v, v), 0.0)))


def enstrophy(v: SpectralField) -> float:
    """||grad v||_2^2 = L^3 sum |kappa|^2 |vhat|^2."""
    if not len(v):
        return 0.0
    k2 = (v.kappa ** 2).sum(axis=1)
    return float(v.torus.volume * np.sum(k2 * (np.abs(v.coeffs) ** 2).sum(axis=1)))


def palinstrophy(v: SpectralField) -> float:
    """||P Lap v||_2^2; equals ||Lap v||_2^2 for solenoidal v on the torus."""
    lap = leray_project(laplacian(v))
    return inner_product(lap, lap)


def is_solenoidal(v: SpectralField, rtol: float = 1e-12) -> bool:
    if not len(v):
        return True
    div = np.abs(divergence(v))
    scale = np.abs(v.coeffs).max() * np.abs(v.kappa).max(initial=0.0)
    return bool(div.max(initial=0.0) <= rtol * max(scale, 1e-300))
