"""Brute-force real-space references: the advective product and L^q norms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from ..errors import ResolutionError
from .field import SpectralField, random_field
from .ops import enstrophy, l2_norm
from .torus import TorusSpec, ball_modes


def _spectral_derivative(values: np.ndarray, L: float, axis: int) -> np.ndarray:
    G = values.shape[-1]
    k = np.fft.fftfreq(G, 1.0 / G) * (2 * np.pi / L)
    k[G // 2] = 0.0  # Nyquist column carries no derivative information
    shape = [1, 1, 1]
    shape[axis] = G
    hat = np.fft.fftn(values, axes=(-3, -2, -1))
    return np.real(np.fft.ifftn(1j * k.reshape(shape) * hat, axes=(-3, -2, -1)))


def nonlinear_grid_oracle(u: SpectralField, v: SpectralField, G: int | None = None,
                          modes: np.ndarray | None = None) -> SpectralField:
    """(u . grad) v evaluated pointwise on a G^3 grid, transformed back.

    Both inputs must be band-limited below G/3 so every returned mode (default:
    all modes with components below G/3) is alias-free.
    """
    G = u.torus.G if G is None else int(G)
    limit = G / 3
    if u.band >= limit or v.band >= limit:
        raise ResolutionError(
            f"inputs with band {max(u.band, v.band)} need a grid finer than {G} (band < G/3)")
    L = u.torus.L
    ug = u.to_grid(G)
    vg = v.to_grid(G)
    out = np.zeros_like(vg)
    for j in range(3):
        out += ug[j][None] * _spectral_derivative(vg, L, axis=j)
    band = int(np.ceil(limit)) - 1
    full = SpectralField.from_grid(u.torus, out, band=band, drop_tol=-1)
    if modes is None:
        return full
    return full.on_modes(modes)


def lq_norm(u: SpectralField, q: float, G: int | None = None) -> float:
    """(int |u|^q dx)^(1/q) by grid quadrature (spectrally accurate)."""
    if not len(u):
        return 0.0
    G = G or max(u.torus.G, 1 << int(np.ceil(np.log2(4 * u.band + 4))))
    vals = u.to_grid(G)
    mag = np.sqrt((vals ** 2).sum(axis=0))
    h3 = (u.torus.L / G) ** 3
    return float((np.sum(mag ** q) * h3) ** (1.0 / q))


@dataclass
class GNProbeResult:
    C1: float
    C2: float
    q: float
    lhs: np.ndarray
    term1: np.ndarray
    term2: np.ndarray

    @property
    def slack(self) -> np.ndarray:
        """Bound minus norm on each sample (nonnegative when the bound holds)."""
        return self.C1 * self.term1 + self.C2 * self.term2 - self.lhs


def gn_terms(u: SpectralField, q: float) -> tuple[float, float, float]:
    """(||u||_q, ||u||_2^{1+3/q-3/2} ||grad u||_2^{3/2-3/q}, ||u||_2)."""
    n2 = l2_norm(u)
    ng = np.sqrt(enstrophy(u))
    a = 1 + 3 / q - 1.5
    b = 1.5 - 3 / q
    t1 = (n2 ** a) * (ng ** b) if n2 > 0 else 0.0
    return lq_norm(u, q), float(t1), n2


def fit_gn_constants(lhs, term1, term2) -> tuple[float, float]:
    """Least-squares fit on the two-term bound, then the smallest uniform inflation that makes it hold."""
    A = np.column_stack([term1, term2])
    lhs = np.asarray(lhs, dtype=float)
    if not np.any(A) or not np.any(lhs):
        return 0.0, 0.0
    coef, _ = nnls(A, lhs)
    pred = A @ coef
    if np.any((pred <= 0) & (lhs > 0)):
        # one-term fits can leave samples uncovered; fall back to per-sample ratios
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = np.where(np.asarray(term2) > 0, lhs / term2, 0.0)
        coef = np.array([coef[0], max(coef[1], r2.max())])
        pred = A @ coef
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pred > 0, lhs / pred, 0.0)
    scale = max(1.0, float(ratio.max()))
    # nudge against roundoff so the inequality holds in floating point
    scale *= 1 + 1e-12
    return float(coef[0] * scale), float(coef[1] * scale)


def gn_constant_probe(samples: int, q: float, torus: TorusSpec | None = None, band: int = 3,
                      rng: np.random.Generator | None = None) -> GNProbeResult:
    """Empirical Gagliardo-Nirenberg constants over random band-limited fields."""
    if samples < 10:
        raise ValueError("gn_constant_probe needs at least 10 samples")
    if q not in (3, 4, 6):
        raise ValueError(f"exponent q must be one of 3, 4, 6, got {q}")
    torus = torus or TorusSpec()
    rng = rng or np.random.default_rng(0)
    pool = ball_modes(band)
    lhs, t1, t2 = [], [], []
    for _ in range(samples):
        count = int(rng.integers(1, min(len(pool), 12) + 1))
        pick = pool[rng.choice(len(pool), size=count, replace=False)]
        # random spectral slope varies the ratio of the two bound terms
        u = random_field(torus, pick, rng, solenoidal=bool(rng.integers(0, 2)))
        if rng.random() < 0.3:
            u = u + SpectralField(torus, [[0, 0, 0]], [rng.standard_normal(3)])
        a, b, c = gn_terms(u, q)
        lhs.append(a)
        t1.append(b)
        t2.append(c)
    lhs, t1, t2 = map(np.asarray, (lhs, t1, t2))
    C1, C2 = fit_gn_constants(lhs, t1, t2)
    return GNProbeResult(C1, C2, q, lhs, t1, t2)
