"""Zero-initial-data lift.

From u0 and a polynomial-in-time forcing we build the initial time
derivatives d_t^j u(0) by the recurrence

    u^[#j] = nu Lap d^{j-1} - sum_r C(j-1, r) d^r . grad d^{j-1-r} + d_t^{j-1} f(0)
    d^j    = P u^[#j]

then the Taylor polynomial beta(t) = sum_k d^k t^k / k! and the source
theta = -d_t beta + nu Lap beta - beta . grad beta + f, so that v = u - beta
solves a problem with v(0) = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError
from .galerkin.convolution import convective_product
from .spectral import SpectralField, TorusSpec, l2_norm, laplacian, leray_project

MAX_ORDER = 8
MAX_FORCING_DEGREE = 8


def poly_field(coeffs, t: float, torus: TorusSpec) -> SpectralField:
    """sum_r coeffs[r] t^r for a sequence of fields."""
    out = SpectralField.zeros(torus)
    for r, c in enumerate(coeffs):
        if len(c):
            out = out + c * (t ** r)
    return out


@dataclass(frozen=True, eq=False)
class ForcingSpec:
    """f(x, t) = sum_r fields[r](x) t^r with band-limited coefficient fields."""

    torus: TorusSpec
    fields: tuple = ()

    def __post_init__(self):
        fields = tuple(self.fields)
        if len(fields) > MAX_FORCING_DEGREE + 1:
            raise ValueError(f"forcing degree {len(fields) - 1} exceeds {MAX_FORCING_DEGREE}")
        for r, f in enumerate(fields):
            if f.torus.L != self.torus.L:
                raise ValueError(f"forcing term t^{r} lives on a different torus")
            if not f.is_hermitian(1e-12):
                raise ValueError(f"forcing term t^{r} is not Hermitian symmetric")
        object.__setattr__(self, "fields", fields)

    @classmethod
    def zero(cls, torus: TorusSpec) -> "ForcingSpec":
        return cls(torus, ())

    @classmethod
    def from_terms(cls, torus: TorusSpec, terms) -> "ForcingSpec":
        """Build from (k, amplitude, [c_0, ..., c_d]) triples; -k partners are added automatically."""
        terms = list(terms)
        degree = max((len(c) for _, _, c in terms), default=0)
        fields = []
        for r in range(degree):
            modes, amps = [], []
            for k, amp, c in terms:
                if r < len(c) and c[r] != 0:
                    modes.append(k)
                    amps.append(np.asarray(amp, dtype=complex) * c[r])
            f = SpectralField(torus, np.reshape(modes, (-1, 3)), np.reshape(amps, (-1, 3)))
            fields.append(f.hermitian_part() * 2 if len(f) else f)
        return cls(torus, tuple(fields))

    @property
    def degree(self) -> int:
        return len(self.fields) - 1

    @property
    def is_zero(self) -> bool:
        return all(not np.any(f.coeffs) for f in self.fields)

    def term(self, r: int) -> SpectralField:
        return self.fields[r] if r < len(self.fields) else SpectralField.zeros(self.torus)

    def evaluate(self, t: float) -> SpectralField:
        return poly_field(self.fields, t, self.torus)

    def derivative_at_zero(self, j: int) -> SpectralField:
        return self.term(j) * math.factorial(j)

    def norm(self, t: float) -> float:
        return l2_norm(self.evaluate(t))

    def has_mean(self) -> bool:
        return any(np.any(f.mean_mode() != 0) for f in self.fields)

    def to_json_dict(self) -> dict:
        return {"L": self.torus.L, "terms": [f.to_json_dict() for f in self.fields]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "ForcingSpec":
        torus = TorusSpec(float(data["L"]))
        return cls(torus, tuple(SpectralField.from_json_dict(d) for d in data["terms"]))


@dataclass(frozen=True, eq=False)
class LiftData:
    J: int
    nu: float
    derivs: tuple
    pre_projection: tuple
    forcing: ForcingSpec
    theta_coeffs: tuple = field(repr=False, default=())

    @property
    def torus(self) -> TorusSpec:
        return self.derivs[0].torus

    @property
    def u0(self) -> SpectralField:
        return self.derivs[0]

    @property
    def beta_coeffs(self) -> tuple:
        """Taylor coefficients d^k / k!."""
        return tuple(d / math.factorial(k) for k, d in enumerate(self.derivs))

    @property
    def theta_degree(self) -> int:
        return len(self.theta_coeffs) - 1

    def to_json_dict(self) -> dict:
        return {
            "J": self.J,
            "nu": self.nu,
            "derivs": [d.to_json_dict() for d in self.derivs],
            "forcing": self.forcing.to_json_dict(),
        }


@dataclass(frozen=True, eq=False)
class LiftEval:
    t: float
    beta: SpectralField
    dbeta: SpectralField
    lap_beta: SpectralField
    theta: SpectralField


def _product(a: SpectralField, b: SpectralField, max_modes: int | None) -> SpectralField:
    return convective_product(a, b, max_modes=max_modes)


def build_lift(u0: SpectralField, forcing: ForcingSpec | None, J: int, nu: float,
               max_band: int = 64, max_modes: int | None = 200_000) -> LiftData:
    """Derivative stack d^0..d^J and the polynomial coefficients of theta."""
    if not 1 <= J <= MAX_ORDER:
        raise ValueError(f"lift order J must lie in [1, {MAX_ORDER}], got {J}")
    if nu <= 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    torus = u0.torus
    forcing = forcing if forcing is not None else ForcingSpec.zero(torus)
    derivs = [u0]
    pre = [u0]
    for j in range(1, J + 1):
        acc = laplacian(derivs[j - 1]) * nu
        for r in range(j):
            prod = _product(derivs[r], derivs[j - 1 - r], max_modes)
            acc = acc - prod * math.comb(j - 1, r)
        acc = acc + forcing.derivative_at_zero(j - 1)
        if acc.band > max_band:
            raise ResolutionError(f"derivative order {j} reaches band {acc.band} > {max_band}")
        pre.append(acc)
        derivs.append(leray_project(acc))

    # theta(t) = sum_r theta_r t^r
    b = [d / math.factorial(k) for k, d in enumerate(derivs)]
    degree = max(2 * J, forcing.degree)
    theta = []
    for r in range(degree + 1):
        acc = forcing.term(r)
        if r <= J - 1:
            acc = acc - b[r + 1] * (r + 1)
        if r <= J:
            acc = acc + laplacian(b[r]) * nu
        for a in range(max(0, r - J), min(r, J) + 1):
            acc = acc - _product(b[a], b[r - a], max_modes)
        theta.append(acc)
    return LiftData(J, float(nu), tuple(derivs), tuple(pre), forcing, tuple(theta))


def beta_eval(lift: LiftData, t: float) -> SpectralField:
    return poly_field(lift.beta_coeffs, t, lift.torus)


def beta_time_derivative(lift: LiftData, t: float, order: int = 1) -> SpectralField:
    """d_t^order beta(t); identically zero once order exceeds J."""
    torus = lift.torus
    out = SpectralField.zeros(torus)
    for k in range(order, lift.J + 1):
        out = out + lift.derivs[k] * (t ** (k - order) / math.factorial(k - order))
    return out


def lift_eval(lift: LiftData, t: float) -> LiftEval:
    beta = beta_eval(lift, t)
    return LiftEval(t, beta, beta_time_derivative(lift, t), laplacian(beta), theta_eval(lift, t))


def theta_eval(lift: LiftData, t: float) -> SpectralField:
    """theta(t) assembled from beta(t) directly (not Leray projected)."""
    beta = beta_eval(lift, t)
    out = (laplacian(beta) * lift.nu - beta_time_derivative(lift, t)
           - convective_product(beta, beta) + lift.forcing.evaluate(t))
    return out


def theta_poly_eval(lift: LiftData, t: float) -> SpectralField:
    """theta(t) from the stored polynomial coefficients."""
    return poly_field(lift.theta_coeffs, t, lift.torus)


def theta_derivative_at_zero(lift: LiftData, j: int) -> SpectralField:
    if j >= len(lift.theta_coeffs):
        return SpectralField.zeros(lift.torus)
    return lift.theta_coeffs[j] * math.factorial(j)


@dataclass
class OrthogonalityReport:
    ratios: list
    norms: list
    tol: float

    @property
    def max_ratio(self) -> float:
        return max(self.ratios, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.tol


def check_theta_orthogonal(lift: LiftData, jmax: int | None = None, floor: float | None = None,
                           tol: float = 1e-8) -> OrthogonalityReport:
    """||P theta^(j)(0)|| / max(||theta^(j)(0)||, floor) for j = 0..jmax.

    The default floor is 1e-12 times the size of the pre-projection fields,
    so a theta derivative that vanishes up to roundoff reads as ratio ~0.
    """
    jmax = lift.J - 1 if jmax is None else jmax
    if jmax > lift.J - 1:
        raise ValueError(f"jmax must be at most J - 1 = {lift.J - 1}")
    if floor is None:
        scale = max((l2_norm(p) for p in lift.pre_projection), default=0.0)
        floor = max(1e-12 * scale, 1e-300)
    ratios, norms = [], []
    for j in range(jmax + 1):
        th = theta_derivative_at_zero(lift, j)
        norm = l2_norm(th)
        ratios.append(l2_norm(leray_project(th)) / max(norm, floor))
        norms.append(norm)
    return OrthogonalityReport(ratios, norms, tol)


def solenoidal_defect(lift: LiftData) -> float:
    """Largest |kappa . d^j| relative to the field scale over all derivative orders."""
    worst = 0.0
    for d in lift.derivs:
        if not len(d):
            continue
        div = np.abs((d.coeffs * d.kappa).sum(axis=1)).max()
        scale = np.abs(d.coeffs).max() * np.abs(d.kappa).max()
        if scale > 0:
            worst = max(worst, div / scale)
    return float(worst)

