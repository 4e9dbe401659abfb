"""Invariant suites run by the ``verify`` command."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .config import build_problem
from .continuation import StepperConfig, energy_audit, integrate
from .exhaust import CutoffSpec
from .galerkin import TrilinearTensor, assemble_trilinear, convective_product
from .lift import check_theta_orthogonal
from .spectral import (
    BasisSpec,
    ball_modes,
    gn_constant_probe,
    inner_product,
    l2_norm,
    leray_project,
    nonlinear_grid_oracle,
    random_field,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    defect: float
    tol: float
    degenerate: bool = False
    note: str = ""


def oracle_defect(torus, rng, n_fields: int = 20, max_modes: int = 20, band: int = 3) -> float:
    """Max per-mode gap between the triad convolution and the grid oracle over random pairs."""
    pool = ball_modes(band)
    worst = 0.0
    for _ in range(n_fields):
        u, v = (random_field(torus, pool[rng.choice(len(pool), int(rng.integers(1, max_modes // 2 + 1)),
                                                    replace=False)], rng, solenoidal=False)
                for _ in range(2))
        conv = convective_product(u, v)
        orac = nonlinear_grid_oracle(u, v, G=32)
        worst = max(worst, float(np.abs(orac.restrict(orac.modes) - conv.restrict(orac.modes)).max()))
    return worst


def flatness_slope(system, J: int, t_lo: float = 1e-3, t_hi: float = 1e-2, points: int = 9) -> tuple[float, bool]:
    """Log-log slope of ||v(t)|| on [t_lo, t_hi] from a fine fixed-step RK4 run."""
    times = np.geomspace(t_lo, t_hi, points)
    stepper = StepperConfig(mode="fixed", h=t_lo / 10)
    traj = integrate(system, np.zeros(system.n), 0.0, t_hi, stepper, samples=np.r_[0.0, times])
    norms = np.linalg.norm(traj.states[1:], axis=1)
    if not np.all(norms > 0):
        return 0.0, True
    slope = np.polyfit(np.log(times), np.log(norms), 1)[0]
    return float(slope), False


def run_verify(cfg: dict, seed: int | None = None) -> list:
    seed = cfg["seed"] if seed is None else seed
    rng = np.random.default_rng(seed)
    results = []
    prob = build_problem(cfg, "lifted")
    torus, u0 = prob.torus, prob.u0
    zero_data = not len(u0) or not np.any(u0.coeffs)

    # projector idempotence on random (non-solenoidal) fields
    worst = 0.0
    for _ in range(5):
        v = random_field(torus, ball_modes(3)[rng.choice(122, 20, replace=False)], rng, solenoidal=False)
        p1 = leray_project(v)
        p2 = leray_project(p1)
        orth = abs(inner_product(p1, v - p1)) / max(l2_norm(v) ** 2, 1e-300)
        worst = max(worst, float(np.abs(p2.coeffs - p1.coeffs).max()), orth)
    results.append(CheckResult("projector_idempotence", worst <= 1e-12, worst, 1e-12))

    # tensor skewness and the cubic cancellation
    small = BasisSpec(torus, min(max(cfg["K"], 2), 3))
    tensor = assemble_trilinear(small)
    if "corrupt-tensor" in cfg["test_hooks"] and tensor.nnz:
        value = tensor.value.copy()
        value[0] += 1.0
        tensor = TrilinearTensor(tensor.n, tensor.i, tensor.m, tensor.k, value)
    skew = tensor.skew_defect()
    results.append(CheckResult("tensor_skewness", skew <= 1e-13, skew, 1e-13))
    worst = 0.0
    for _ in range(20):
        g = rng.standard_normal(small.n)
        total, scale = tensor.cubic_form(g)
        worst = max(worst, abs(total) / scale if scale else 0.0)
    results.append(CheckResult("trilinear_cancellation", worst <= 1e-12, worst, 1e-12))

    # convolution vs grid oracle
    d = oracle_defect(torus, rng, n_fields=10)
    results.append(CheckResult("oracle_vs_convolution", d <= 1e-9, d, 1e-9))

    # theta orthogonality at t = 0
    lift = prob.lift
    rep = check_theta_orthogonal(lift)
    degenerate = all(n == 0 for n in rep.norms)
    results.append(CheckResult("theta_orthogonality", rep.passed, rep.max_ratio, rep.tol, degenerate))

    # flatness slope of the lifted unknown
    slope, deg = flatness_slope(prob.system, lift.J)
    target = lift.J + 0.5
    results.append(CheckResult("flatness_slope", deg or slope >= target, slope, target, deg or zero_data,
                               "slope must be at least J + 1/2"))

    # energy identity along a direct run
    direct = build_problem(cfg, "direct")
    traj = integrate(direct.system, direct.initial_state(), 0.0, cfg["T"], direct.stepper, samples=161)
    audit = energy_audit(direct.system, traj)
    defect = max(audit.instantaneous, audit.integrated)
    ok = defect <= 1e-8 and audit.apriori_ok and audit.monotone is not False
    results.append(CheckResult("energy_identity", ok, defect, 1e-8, zero_data))

    # Gagliardo-Nirenberg probe
    worst_slack = math.inf
    for q in (3, 4, 6):
        probe = gn_constant_probe(20, q, torus, rng=rng)
        worst_slack = min(worst_slack, float(probe.slack.min()))
    results.append(CheckResult("gn_probe", worst_slack >= 0, max(0.0, -worst_slack), 0.0))

    # cutoff sandwich
    spec = CutoffSpec(2.0)
    rho = np.linspace(0, 2.0, 801)
    eta = spec.profile(rho / spec.r)
    lower = (rho <= spec.r / 2).astype(float)
    upper = (rho <= 0.75 * spec.r).astype(float)
    viol = float(max(np.max(lower - eta), np.max(eta - upper), 0.0))
    results.append(CheckResult("cutoff_sandwich", viol == 0.0, viol, 0.0))
    return results


def report_dict(results: list) -> dict:
    return {"checks": [asdict(r) for r in results], "passed": all(r.passed for r in results)}


def lift_check(cfg: dict) -> dict:
    prob = build_problem(cfg, "lifted")
    lift = prob.lift
    rep = check_theta_orthogonal(lift)
    rhs0 = prob.system.rhs(0.0, np.zeros(prob.basis.n))
    scale = max(np.abs(prob.system.Theta).max(initial=0.0), 1e-300)
    slope, degenerate = flatness_slope(prob.system, lift.J)
    out = {
        "J": lift.J,
        "theta_ratios": rep.ratios,
        "theta_norms": rep.norms,
        "rhs_at_origin": float(np.abs(rhs0).max()),
        "rhs_at_origin_relative": float(np.abs(rhs0).max() / scale),
        "flatness_slope": None if degenerate else slope,
        "derivative_norms": [l2_norm(d) for d in lift.derivs],
        "degenerate": degenerate,
    }
    passed = rep.passed and (degenerate or slope >= lift.J + 0.5) and out["rhs_at_origin_relative"] <= 1e-10
    out["passed"] = bool(passed)
    return out
