"""Finite-dimensional Galerkin systems.

Lifted form, for v_n = sum g_k w_k:

    g_k' = -sum a_{imk} g_i g_m - sum_m (b_{mk}(t) + c_{mk}(t)) g_m - nu lambda_k g_k + theta^k(t)

Direct form, for u_n = sum g_k w_k:

    g_k' = -sum a_{imk} g_i g_m - nu lambda_k g_k + f^k(t)
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionError, ResolutionError, SpecMismatchError
from ..lift import ForcingSpec, LiftData, beta_eval
from ..spectral import BasisSpec, SpectralField, l2_norm, laplacian
from .convolution import TriadTable, convective_product
from .tensor import TrilinearTensor, assemble_trilinear


def _poly_vec(coeffs: np.ndarray, t: float) -> np.ndarray:
    """Horner evaluation of sum_r coeffs[r] t^r for a (deg+1, n) array."""
    out = np.zeros(coeffs.shape[1:])
    for c in coeffs[::-1]:
        out = out * t + c
    return out


def _poly_vec_derivative(coeffs: np.ndarray) -> np.ndarray:
    if coeffs.shape[0] <= 1:
        return np.zeros((1,) + coeffs.shape[1:])
    r = np.arange(1, coeffs.shape[0]).reshape((-1,) + (1,) * (coeffs.ndim - 1))
    return coeffs[1:] * r


def advection_operator(torus, field: SpectralField, modes: np.ndarray) -> sp.csr_matrix:
    """Matrix of w -> (field . grad) w on flattened (|modes|, 3) coefficient arrays."""
    tab = TriadTable(torus, field.modes, modes, modes)
    fac = 1j * np.einsum("ij,ij->i", field.coeffs[tab.ia], tab.kb[tab.ib])
    rows = (3 * tab.io[:, None] + np.arange(3)).ravel()
    cols = (3 * tab.ib[:, None] + np.arange(3)).ravel()
    vals = np.repeat(fac, 3)
    size = 3 * len(modes)
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def stretching_operator(torus, field: SpectralField, modes: np.ndarray) -> sp.csr_matrix:
    """Matrix of w -> (w . grad) field on flattened coefficient arrays."""
    tab = TriadTable(torus, modes, field.modes, modes)
    kb = tab.kb[tab.ib]  # (N, 3) wave numbers of the field's modes
    fb = field.coeffs[tab.ib]  # (N, 3)
    # out[io, c] += sum_d w[ia, d] * i kb[d] * fb[c]
    vals = 1j * fb[:, :, None] * kb[:, None, :]  # (N, c, d)
    rows = np.broadcast_to(3 * tab.io[:, None, None] + np.arange(3)[:, None], vals.shape)
    cols = np.broadcast_to(3 * tab.ia[:, None, None] + np.arange(3)[None, :], vals.shape)
    size = 3 * len(modes)
    return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(size, size))


@dataclass(frozen=True, eq=False)
class BetaMatrices:
    """B_r[m, k] = <(d^r/r!) . grad w_m, w_k>, C_r[m, k] = <w_m . grad (d^r/r!), w_k>."""

    B: np.ndarray  # (J+1, n, n)
    C: np.ndarray

    @classmethod
    def build(cls, basis: BasisSpec, lift: LiftData) -> "BetaMatrices":
        W = basis.synthesis
        A = basis.analysis
        Bs, Cs = [], []
        for coef in lift.beta_coeffs:
            if not len(coef):
                Bs.append(np.zeros((basis.n, basis.n)))
                Cs.append(np.zeros((basis.n, basis.n)))
                continue
            ad = advection_operator(basis.torus, coef, basis.modes)
            st = stretching_operator(basis.torus, coef, basis.modes)
            # (A op W)[k, m] = <op w_m, w_k>; transpose to index as [m, k]
            Bs.append(np.real((A @ (ad @ W)).toarray()).T)
            Cs.append(np.real((A @ (st @ W)).toarray()).T)
        return cls(np.array(Bs), np.array(Cs))

    @property
    def degree(self) -> int:
        return self.B.shape[0] - 1

    def b(self, t: float) -> np.ndarray:
        return _poly_vec(self.B, t)

    def c(self, t: float) -> np.ndarray:
        return _poly_vec(self.C, t)

    def skew_defect(self) -> float:
        if not self.B.size:
            return 0.0
        return float(np.abs(self.B + self.B.transpose(0, 2, 1)).max())


@dataclass
class GalerkinState:
    g: np.ndarray
    t: float

    def __post_init__(self):
        self.g = np.array(self.g, dtype=float)
        if not np.all(np.isfinite(self.g)):
            raise ValueError("state contains non-finite entries")


@dataclass
class ResidualReport:
    t: float
    q_norm: float
    orth_defect: float
    energy_defect: float


def config_fingerprint(obj) -> str:
    text = json.dumps(obj, sort_keys=True, default=repr)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class _Base:
    """Shared pieces: basis, viscosity, nonlinear term."""

    formulation = "base"

    def __init__(self, basis: BasisSpec, nu: float, nonlinear: str = "convolution"):
        if nu <= 0:
            raise ValueError(f"viscosity must be positive, got {nu}")
        if nonlinear not in ("convolution", "tensor"):
            raise ValueError(f"unknown nonlinear strategy {nonlinear!r}")
        self.basis = basis
        self.nu = float(nu)
        self.n = basis.n
        self.lam = basis.eigenvalues
        self.nonlinear_mode = nonlinear
        self._table = None
        self._tensor = None

    @property
    def table(self) -> TriadTable:
        if self._table is None:
            m = self.basis.modes
            self._table = TriadTable(self.basis.torus, m, m, m)
        return self._table

    @property
    def tensor(self) -> TrilinearTensor:
        if self._tensor is None:
            self._tensor = assemble_trilinear(self.basis)
        return self._tensor

    def _check(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n,):
            raise DimensionError(f"state has shape {g.shape}, system expects ({self.n},)")
        return g

    def nonlinear(self, g: np.ndarray) -> np.ndarray:
        """N_k = sum a_{imk} g_i g_m."""
        if self.nonlinear_mode == "tensor":
            return self.tensor.contract(g)
        u = self.basis.coeff_array(g)
        return self.basis.project_array(self.table.apply(u, u))

    def enstrophy(self, g: np.ndarray) -> float:
        return float(np.sum(self.lam * g * g))

    def palinstrophy(self, g: np.ndarray) -> float:
        return float(np.sum(self.lam ** 2 * g * g))

    def energy(self, g: np.ndarray) -> float:
        return float(np.dot(g, g))

    def enstrophy_rate(self, t: float, g: np.ndarray) -> float:
        """dE/dt = 2 sum lambda g g' by the chain rule through the right-hand side."""
        return float(2.0 * np.sum(self.lam * g * self.rhs(t, g)))

    def reconstruct_v(self, g: np.ndarray) -> SpectralField:
        return self.basis.to_field(self._check(g))

    def fingerprint(self) -> str:
        return self.basis.fingerprint()

    def checkpoint(self, state: GalerkinState, config_hash: str = "") -> dict:
        return {
            "format_version": 1,
            "formulation": self.formulation,
            "t": float(state.t),
            "g": [float(x) for x in state.g],
            "basis_hash": self.fingerprint(),
            "config_hash": config_hash,
        }

    def load_checkpoint(self, data: dict) -> GalerkinState:
        if data.get("basis_hash") != self.fingerprint():
            raise SpecMismatchError("checkpoint was written for a different basis")
        return GalerkinState(np.array(data["g"], dtype=float), float(data["t"]))


class DirectSystem(_Base):
    """Galerkin truncation of the unlifted problem."""

    formulation = "direct"

    def __init__(self, basis: BasisSpec, nu: float, forcing: ForcingSpec | None = None,
                 nonlinear: str = "convolution"):
        super().__init__(basis, nu, nonlinear)
        self.forcing = forcing if forcing is not None else ForcingSpec.zero(basis.torus)
        if self.forcing.fields:
            self.F = np.array([basis.project(f) for f in self.forcing.fields])
        else:
            self.F = np.zeros((1, self.n))

    def forcing_coeffs(self, t: float) -> np.ndarray:
        return _poly_vec(self.F, t)

    def rhs(self, t: float, g: np.ndarray) -> np.ndarray:
        g = self._check(g)
        return -self.nonlinear(g) - self.nu * self.lam * g + self.forcing_coeffs(t)

    def initial_state(self, u0: SpectralField) -> GalerkinState:
        return GalerkinState(self.basis.project(u0), 0.0)

    def reconstruct_u(self, g: np.ndarray, t: float = 0.0) -> SpectralField:
        return self.reconstruct_v(g)

    def u_enstrophy(self, t: float, g: np.ndarray) -> float:
        return self.enstrophy(g)

    def u_norm(self, t: float, g: np.ndarray) -> float:
        return float(np.sqrt(self.energy(g)))

    def forcing_norm(self, t: float) -> float:
        return self.forcing.norm(t) if self.forcing.fields else 0.0

    def energy_balance(self, t: float, g: np.ndarray, gdot: np.ndarray | None = None):
        """(d/dt 1/2 |u|^2, -nu |grad u|^2, <f, u>); sums to zero along solutions."""
        gdot = self.rhs(t, g) if gdot is None else gdot
        return float(g @ gdot), -self.nu * self.enstrophy(g), float(self.forcing_coeffs(t) @ g)

    def q_residual(self, t: float, g: np.ndarray, gdot: np.ndarray | None = None,
                   max_modes: int = 500_000) -> ResidualReport:
        g = self._check(g)
        gdot = self.rhs(t, g) if gdot is None else gdot
        u = self.reconstruct_v(g)
        du = self.basis.to_field(gdot)
        f = self.forcing.evaluate(t)
        q = du - laplacian(u) * self.nu + convective_product(u, u, max_modes=max_modes) - f
        return _report(self, t, q, self.energy_balance(t, g, gdot))


class LiftedSystem(_Base):
    """Galerkin truncation of the zero-initial-data problem for v = u - beta."""

    formulation = "lifted"

    def __init__(self, basis: BasisSpec, lift: LiftData, nonlinear: str = "convolution"):
        super().__init__(basis, lift.nu, nonlinear)
        if lift.torus.L != basis.torus.L:
            raise SpecMismatchError("lift and basis live on different tori")
        self.lift = lift
        self.beta = BetaMatrices.build(basis, lift)
        # (B_r + C_r)^T so that the linear term is a plain matvec
        self.lin = (self.beta.B + self.beta.C).transpose(0, 2, 1).copy()
        self.Theta = np.array([basis.project(th) for th in lift.theta_coeffs])

    def theta_coeffs(self, t: float) -> np.ndarray:
        return _poly_vec(self.Theta, t)

    def rhs(self, t: float, g: np.ndarray) -> np.ndarray:
        g = self._check(g)
        return (-self.nonlinear(g) - _poly_vec(self.lin, t) @ g - self.nu * self.lam * g
                + self.theta_coeffs(t))

    def initial_state(self) -> GalerkinState:
        return GalerkinState(np.zeros(self.n), 0.0)

    def reconstruct_u(self, g: np.ndarray, t: float) -> SpectralField:
        return self.reconstruct_v(g) + beta_eval(self.lift, t)

    def u_enstrophy(self, t: float, g: np.ndarray) -> float:
        from ..spectral import enstrophy
        return enstrophy(self.reconstruct_u(g, t))

    def u_norm(self, t: float, g: np.ndarray) -> float:
        return l2_norm(self.reconstruct_u(g, t))

    def forcing_norm(self, t: float) -> float:
        return self.lift.forcing.norm(t) if self.lift.forcing.fields else 0.0

    def energy_balance(self, t: float, g: np.ndarray, gdot: np.ndarray | None = None):
        """(d/dt 1/2 |v|^2, -nu |grad v|^2, -sum c g g, <theta, v>)."""
        gdot = self.rhs(t, g) if gdot is None else gdot
        c = self.beta.c(t)
        return (float(g @ gdot), -self.nu * self.enstrophy(g), -float(g @ c @ g),
                float(self.theta_coeffs(t) @ g))

    def q_residual(self, t: float, g: np.ndarray, gdot: np.ndarray | None = None,
                   max_modes: int = 500_000) -> ResidualReport:
        """q_n = v' - nu Lap v + v.grad v + beta.grad v + v.grad beta - theta on the enlarged mode set."""
        from ..lift import theta_poly_eval
        g = self._check(g)
        gdot = self.rhs(t, g) if gdot is None else gdot
        v = self.reconstruct_v(g)
        dv = self.basis.to_field(gdot)
        beta = beta_eval(self.lift, t)
        q = (dv - laplacian(v) * self.nu
             + convective_product(v, v, max_modes=max_modes)
             + convective_product(beta, v, max_modes=max_modes)
             + convective_product(v, beta, max_modes=max_modes)
             - theta_poly_eval(self.lift, t))
        return _report(self, t, q, self.energy_balance(t, g, gdot))


def _report(system, t, q: SpectralField, balance) -> ResidualReport:
    qn = l2_norm(q)
    proj = system.basis.project(q)
    orth = float(np.abs(proj).max() / qn) if qn > 0 else 0.0
    lhs, rest = balance[0], balance[1:]
    scale = abs(lhs) + sum(abs(x) for x in rest)
    energy = abs(lhs - sum(rest)) / scale if scale > 0 else 0.0
    return ResidualReport(float(t), qn, orth, float(energy))


class GridDirectSystem(DirectSystem):
    """Pseudo-spectral direct system: u . grad u evaluated on a grid with 2/3-rule truncation.

    Intended for large bases; agrees with the exact convolution whenever
    the basis band is below G/3.
    """

    def __init__(self, basis: BasisSpec, nu: float, forcing: ForcingSpec | None = None,
                 G: int | None = None):
        super().__init__(basis, nu, forcing, nonlinear="convolution")
        band = int(np.abs(basis.modes).max())
        if G is None:
            G = 1 << int(math.ceil(math.log2(3 * band + 3)))
        if 3 * band >= G:
            raise ResolutionError(f"basis band {band} needs a grid larger than {G} for dealiasing")
        self.G = int(G)
        idx = np.mod(basis.modes, G)
        self._flat = (idx[:, 0] * G + idx[:, 1]) * G + idx[:, 2]
        k1 = np.fft.fftfreq(G, 1.0 / G) * basis.torus.dk
        self._k = np.meshgrid(k1, k1, k1, indexing="ij")

    def _to_grid(self, hat: np.ndarray) -> np.ndarray:
        G = self.G
        arr = np.zeros((3, G ** 3), dtype=complex)
        arr[:, self._flat] = hat.T
        return np.fft.ifftn(arr.reshape(3, G, G, G), axes=(1, 2, 3)).real * G ** 3

    def nonlinear(self, g: np.ndarray) -> np.ndarray:
        G = self.G
        hat = self.basis.coeff_array(g)
        u = self._to_grid(hat)
        # divergence form: (u . grad) u = div(u u) for solenoidal u
        out = np.zeros((len(self.basis.modes), 3), dtype=complex)
        for i in range(3):
            acc = np.zeros((G, G, G), dtype=complex)
            for j in range(3):
                acc += 1j * self._k[j] * np.fft.fftn(u[i] * u[j])
            out[:, i] = acc.reshape(-1)[self._flat] / G ** 3
        return self.basis.project_array(out)


def equivalence_error(direct_traj, lifted_traj, direct: DirectSystem, lifted: LiftedSystem) -> float:
    """max_t ||u_direct - (v + beta)|| / max_t ||u_direct|| over shared sample times."""
    worst, scale = 0.0, 0.0
    for t, gd, gl in zip(direct_traj.times, direct_traj.states, lifted_traj.states):
        ud = direct.reconstruct_u(gd, t)
        ul = lifted.reconstruct_u(gl, t)
        worst = max(worst, l2_norm(ud - ul))
        scale = max(scale, l2_norm(ud))
    return worst / scale if scale > 0 else worst

