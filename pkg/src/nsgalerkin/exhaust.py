"""Whole-space approximation by growing tori with cut-off data.

eta(R) is the radial profile of J_eps * g with g(x) = g_o(|x|), where g_o = 1
on [0, 7/12], 0 on [2/3, inf) and linear in between, and J_eps the standard
3D bump mollifier of width eps = 1/24. Then eta = 1 for R <= 13/24 and eta = 0
for R >= 17/24, and eta_r(x) = eta(|x| / r).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import make_interp_spline

from .continuation import REACHED, StepperConfig, integrate
from .errors import ResolutionError
from .galerkin import GridDirectSystem
from .spectral import BasisSpec, SpectralField, TorusSpec, l2_norm, leray_project

G_INNER = 7 / 12
G_OUTER = 2 / 3
_NODES = 48


def g_o(s):
    s = np.asarray(s, dtype=float)
    return np.clip((G_OUTER - s) / (G_OUTER - G_INNER), 0.0, 1.0)


def _bump(rho, eps):
    x = np.asarray(rho, dtype=float) / eps
    out = np.zeros_like(x)
    m = x < 1
    out[m] = np.exp(-1.0 / (1.0 - x[m] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class CutoffSpec:
    """Radial cutoff eta_r with a tabulated transition and a quintic spline."""

    r: float = 1.0
    eps: float = 1 / 24
    table_size: int = 241

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("cutoff radius must be positive")
        if not 0 < self.eps < (G_INNER - 0.5):
            raise ValueError(f"mollifier width must lie in (0, {G_INNER - 0.5:.4f})")

    @property
    def inner(self) -> float:
        """Unscaled radius below which eta is exactly 1."""
        return G_INNER - self.eps

    @property
    def outer(self) -> float:
        return G_OUTER + self.eps

    @cached_property
    def _norm(self) -> float:
        val, _ = quad(lambda p: _bump(p, self.eps) * p * p, 0, self.eps)
        return 1.0 / (4 * math.pi * val)

    def _H(self, a: np.ndarray) -> np.ndarray:
        """int_0^min(a, eps) J(rho) rho d rho by Gauss-Legendre."""
        a = np.clip(np.asarray(a, dtype=float), 0.0, self.eps)
        x, w = np.polynomial.legendre.leggauss(_NODES)
        rho = a[..., None] / 2 * (x + 1)
        return self._norm * (a / 2) * np.sum(w * _bump(rho, self.eps) * rho, axis=-1)

    def _profile_exact(self, R: float) -> float:
        """Radial convolution (2 pi / R) int g_o(s) s [H(R + s) - H(|R - s|)] ds."""
        if R <= self.inner:
            return 1.0
        if R >= self.outer:
            return 0.0
        lo, hi = R - self.eps, R + self.eps
        cuts = sorted({lo, hi, R} | {p for p in (G_INNER, G_OUTER) if lo < p < hi})
        x, w = np.polynomial.legendre.leggauss(_NODES)
        total = 0.0
        for a, b in zip(cuts, cuts[1:]):
            s = (b - a) / 2 * (x + 1) + a
            vals = g_o(s) * s * (self._H(R + s) - self._H(np.abs(R - s)))
            total += (b - a) / 2 * np.sum(w * vals)
        return float(np.clip(2 * math.pi / R * total, 0.0, 1.0))

    @property
    def _spline(self):
        # the unscaled profile depends only on eps, so the table is shared across radii
        return _profile_spline(self.eps, self.table_size)

    def profile(self, R, nu: int = 0):
        """eta or its nu-th radial derivative at unscaled radius R."""
        R = np.asarray(R, dtype=float)
        inside = (R > self.inner) & (R < self.outer)
        if nu == 0:
            base = np.where(R <= self.inner, 1.0, 0.0)
        else:
            base = np.zeros_like(R)
        if np.any(inside):
            vals = self._spline(R[inside], nu)
            if nu == 0:
                vals = np.clip(vals, 0.0, 1.0)
            base = base.astype(float).copy()
            base[inside] = vals
        return base

    def radial_derivative(self, rho, order: int):
        """d^order/d rho^order of eta_r at physical radius rho."""
        return self.profile(np.asarray(rho) / self.r, order) / self.r ** order

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.sqrt((x ** 2).sum(axis=-1))
        return self.profile(rho / self.r)


@lru_cache(maxsize=8)
def _profile_spline(eps: float, table_size: int):
    ref = CutoffSpec(1.0, eps, table_size)
    xs = np.linspace(ref.inner, ref.outer, table_size)
    ys = np.array([ref._profile_exact(x) for x in xs])
    ys[0], ys[-1] = 1.0, 0.0
    return make_interp_spline(xs, ys, k=5)


def eta_eval(spec: CutoffSpec, x) -> float | np.ndarray:
    """eta_r at a point (or array of points in the last axis)."""
    out = spec(x)
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------
# data profiles, u = grad psi x e (exactly solenoidal)

DEFAULT_AXIS = np.array([1.0, 2.0, 3.0]) / math.sqrt(14.0)


@dataclass(frozen=True)
class Profile:
    kind: str = "bump"  # bump | clay | zero
    amplitude: float = 1.0
    width: float = 0.75
    axis: tuple = tuple(DEFAULT_AXIS)

    def __post_init__(self):
        if self.kind not in ("bump", "clay", "zero"):
            raise ValueError(f"unknown profile kind {self.kind!r}")

    def grad_psi(self, X: np.ndarray) -> np.ndarray:
        """X has shape (3, ...)."""
        r2 = (X ** 2).sum(axis=0)
        if self.kind == "bump":
            s2 = self.width ** 2
            return -self.amplitude * X / s2 * np.exp(-r2 / (2 * s2))
        if self.kind == "clay":
            w2 = self.width ** 2
            return -self.amplitude * X / w2 * (1 + r2 / w2) ** -1.5
        return np.zeros_like(X)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        gp = self.grad_psi(X)
        e = np.asarray(self.axis, dtype=float).reshape((3,) + (1,) * (X.ndim - 1))
        return np.stack([gp[1] * e[2] - gp[2] * e[1],
                         gp[2] * e[0] - gp[0] * e[2],
                         gp[0] * e[1] - gp[1] * e[0]])

    def support_radius(self, tol: float = 1e-9) -> float:
        """Radius beyond which |u| stays below tol * amplitude (inf for algebraic decay)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "clay":
            return math.inf
        s = self.width
        rho = s
        while rho / s ** 2 * math.exp(-rho * rho / (2 * s * s)) > tol:
            rho += 0.01 * s
        return rho


def grid_coordinates(torus: TorusSpec) -> np.ndarray:
    x = torus.grid_points(centered=True)
    return np.stack(np.meshgrid(x, x, x, indexing="ij"))


@dataclass
class TruncatedData:
    rung: int
    torus: TorusSpec
    u_on: SpectralField
    f_n: SpectralField
    divergence_defect: float
    gradient_norm: float
    tail: float


def truncate_data(profile: Profile, r: float, torus: TorusSpec, rung: int = 0,
                  forcing: Profile | None = None, cutoff_eps: float = 1 / 24,
                  tail_tol: float = 1e-6) -> TruncatedData:
    """Sample eta_r * profile on the torus grid, transform, drop the mean, Leray-project.

    Raises ResolutionError when the outer spectral shell of the sampled
    data still carries more than ``tail_tol`` of the peak coefficient.
    """
    X = grid_coordinates(torus)
    eta = CutoffSpec(r, cutoff_eps)(np.moveaxis(X, 0, -1))
    vals = eta[None] * profile(X)
    raw = SpectralField.from_grid(torus, vals, drop_tol=-1).without_mean()
    peak = np.abs(raw.coeffs).max() if len(raw) else 0.0
    edge = np.abs(raw.modes).max(axis=1) >= torus.G // 2 - 2 if len(raw) else np.zeros(0, bool)
    tail = float(np.abs(raw.coeffs[edge]).max() / peak) if peak > 0 and edge.any() else 0.0
    if tail > tail_tol:
        raise ResolutionError(
            f"rung {rung}: spectral tail {tail:.2e} exceeds {tail_tol:.0e} on a {torus.G}^3 grid")
    div = 1j * (raw.coeffs * raw.kappa).sum(axis=1) if len(raw) else np.zeros(0)
    div_norm = float(np.sqrt(torus.volume * np.sum(np.abs(div) ** 2)))
    u_on = leray_project(raw)
    grad = l2_norm(raw - u_on)
    if forcing is not None and forcing.kind != "zero":
        fv = eta[None] * forcing(X)
        f_n = leray_project(SpectralField.from_grid(torus, fv, drop_tol=-1).without_mean())
    else:
        f_n = SpectralField.zeros(torus)
    return TruncatedData(rung, torus, u_on.prune(0.0), f_n.prune(0.0), div_norm, grad, tail)


# ----------------------------------------------------------------------
# exhaustion plan and runs


@dataclass
class ExhaustionPlan:
    radii: list
    grids: list
    profile: Profile = field(default_factory=Profile)
    nu: float = 0.05
    T: float = 0.5
    period_factor: float = 1.6
    sample_points: np.ndarray = None
    sample_times: list = None
    tail_tol: float = 1e-3
    stepper: StepperConfig = field(default_factory=lambda: StepperConfig(rtol=1e-7, atol=1e-10))

    def __post_init__(self):
        r = [float(x) for x in self.radii]
        if not r:
            raise ValueError("an exhaustion plan needs at least one rung")
        if r[0] <= 1:
            raise ValueError(f"first radius must exceed 1, got {r[0]}")
        for a, b in zip(r, r[1:]):
            if not b > a + 1:
                raise ValueError(f"radii must grow by more than 1: {a} -> {b}")
        if len(self.grids) != len(r):
            raise ValueError("one grid size per rung is required")
        if self.period_factor <= 1.5:
            raise ValueError("period factor must exceed 1.5 so the cut-off support fits one period")
        self.radii = r
        if self.sample_points is None:
            self.sample_points = default_sample_points()
        self.sample_points = np.atleast_2d(np.asarray(self.sample_points, dtype=float))
        if self.sample_times is None:
            self.sample_times = [0.0, self.T / 2, self.T]

    def torus(self, n: int) -> TorusSpec:
        return TorusSpec(self.period_factor * self.radii[n], self.grids[n])


def default_sample_points() -> np.ndarray:
    return np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, -0.6, 0.3], [0.4, 0.4, -0.4],
                     [1.0, 0.2, 0.1], [-0.8, 0.5, 0.7]])


@dataclass
class RungResult:
    rung: int
    r: float
    L: float
    G: int
    n: int
    status: str
    values: np.ndarray  # (times, points, 3)
    data_values: np.ndarray  # full-band u_on at the points, (points, 3)
    u0_norm: float
    f_integral: float
    max_norm: float
    apriori_ok: bool
    divergence_defect: float
    gradient_norm: float
    spectral_tail: float


@dataclass
class ExhaustionReport:
    rungs: list
    differences: list
    data_differences: list
    partial: bool

    @property
    def strictly_decreasing(self) -> bool:
        d = self.differences
        return all(b < a for a, b in zip(d, d[1:]))

    def to_json_dict(self) -> dict:
        out = []
        for rr in self.rungs:
            d = asdict(rr)
            d["values"] = rr.values.tolist()
            d["data_values"] = rr.data_values.tolist()
            out.append(d)
        return {"rungs": out, "differences": self.differences,
                "data_differences": self.data_differences, "partial": self.partial}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def run_rung(plan: ExhaustionPlan, n: int, forcing: Profile | None = None,
             keep_trajectory: bool = False):
    torus = plan.torus(n)
    data = truncate_data(plan.profile, plan.radii[n], torus, n, forcing, tail_tol=plan.tail_tol)
    pts = plan.sample_points
    data_vals = data.u_on.evaluate(pts)
    K = (torus.G - 1) // 3
    basis = BasisSpec(torus, K)
    forcing_spec = None
    if len(data.f_n):
        from .lift import ForcingSpec
        forcing_spec = ForcingSpec(torus, (data.f_n,))
    system = GridDirectSystem(basis, plan.nu, forcing_spec, G=torus.G)
    g0 = basis.project(data.u_on)
    times = np.asarray(plan.sample_times, dtype=float)
    if np.all(g0 == 0) and forcing_spec is None:
        traj_states = np.zeros((len(times), basis.n))
        status = REACHED
        traj = None
    else:
        traj = integrate(system, g0, 0.0, plan.T, plan.stepper, samples=times)
        traj_states = traj.states
        status = traj.status
    values = np.array([basis.to_field(g).evaluate(pts) for g in traj_states])
    u0n = float(np.linalg.norm(g0))
    fint = float(l2_norm(data.f_n) * plan.T)
    norms = np.linalg.norm(traj_states, axis=1)
    ok = bool(np.all(norms <= (u0n + fint) * (1 + 1e-9) + 1e-300))
    res = RungResult(n, plan.radii[n], torus.L, torus.G, basis.n, status, values, data_vals, u0n, fint,
                     float(norms.max()), ok, data.divergence_defect, data.gradient_norm, data.tail)
    return (res, system, traj) if keep_trajectory else res


def run_exhaustion(plan: ExhaustionPlan, forcing: Profile | None = None) -> ExhaustionReport:
    rungs = [run_rung(plan, n, forcing) for n in range(len(plan.radii))]
    diffs, ddiffs = [], []
    for a, b in zip(rungs, rungs[1:]):
        m = min(len(a.values), len(b.values))
        diffs.append(float(np.abs(a.values[:m] - b.values[:m]).max()))
        ddiffs.append(float(np.abs(a.data_values - b.data_values).max()))
    partial = any(r.status != REACHED for r in rungs)
    return ExhaustionReport(rungs, diffs, ddiffs, partial)


def bump_plan(**kw) -> ExhaustionPlan:
    """Three-rung plan for a Gaussian-potential bump (support radius about 5)."""
    base = dict(radii=[3.0, 10.5, 12.0], grids=[32, 64, 64], profile=Profile("bump", 0.5, 0.75))
    base.update(kw)
    return ExhaustionPlan(**base)


def tail_norm(profile: Profile, r: float, torus: TorusSpec, cutoff_eps: float = 1 / 24) -> float:
    """||(1 - eta_r) profile||_2 by grid quadrature."""
    X = grid_coordinates(torus)
    eta = CutoffSpec(r, cutoff_eps)(np.moveaxis(X, 0, -1))
    vals = (1 - eta)[None] * profile(X)
    h3 = (torus.L / torus.G) ** 3
    return float(np.sqrt(np.sum(vals ** 2) * h3))
