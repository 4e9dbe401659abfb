"""Time integration, the horizon-extension ladder, and stability diagnostics."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import RK45, cumulative_simpson

from .spectral import enstrophy, l2_norm

REACHED = "reached-horizon"
BLOWUP = "blow-up"
UNDERFLOW = "step-underflow"
RUNG_LIMIT = "rung-limit"


@dataclass(frozen=True)
class StepperConfig:
    mode: str = "adaptive"
    h: float = 1e-3
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = math.inf
    min_step: float = 1e-12

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"stepper mode must be 'adaptive' or 'fixed', got {self.mode!r}")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("stepper tolerances must be positive")
        if self.h <= 0:
            raise ValueError("fixed step h must be positive")
        if not self.min_step < self.max_step:
            raise ValueError("min_step must be smaller than max_step")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    status: str = REACHED
    message: str = ""
    nfev: int = 0
    last_time: float = 0.0
    enstrophy_tail: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def ok(self) -> bool:
        return self.status == REACHED

    def __len__(self) -> int:
        return len(self.times)


def _rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + h / 2, y + h / 2 * k1)
    k3 = rhs(t + h / 2, y + h / 2 * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(system, g0, t0: float, t_end: float, stepper: StepperConfig | None = None,
              samples: int | np.ndarray = 11, blowup_threshold: float = 1e6) -> Trajectory:
    """Advance g from t0 to t_end, recording the state at the sample times.

    ``samples`` is either a count (uniform grid including both ends) or an
    explicit increasing array of times in [t0, t_end]. Integration stops
    early with status blow-up when the state turns non-finite or its
    enstrophy exceeds the threshold, and with step-underflow when the
    adaptive step collapses below ``min_step``.
    """
    stepper = stepper or StepperConfig()
    if not t_end > t0:
        raise ValueError(f"t_end={t_end} must exceed the start time {t0}")
    if np.ndim(samples) == 0:
        times = np.linspace(t0, t_end, int(samples))
    else:
        times = np.asarray(samples, dtype=float)
        if times[0] != t0:
            times = np.r_[t0, times]
    rhs = system.rhs
    y = np.array(g0, dtype=float)
    out = [y.copy()]
    nfev = 0
    tail: list = [system.enstrophy(y)]
    h_prev = None

    def bad(state) -> bool:
        if not np.all(np.isfinite(state)):
            return True
        E = system.enstrophy(state)
        tail.append(E)
        del tail[:-20]
        return not E <= blowup_threshold

    t = t0
    for t_next in times[1:]:
        if stepper.mode == "fixed":
            nsub = max(1, int(math.ceil((t_next - t) / stepper.h - 1e-12)))
            h = (t_next - t) / nsub
            for s in range(nsub):
                with np.errstate(over="ignore", invalid="ignore"):
                    y = _rk4_step(rhs, t + s * h, y, h)
                nfev += 4
                if bad(y):
                    return _stop(times, out, BLOWUP, f"enstrophy threshold crossed near t={t + (s + 1) * h:.6g}",
                                 nfev, t + s * h, tail)
        else:
            kw = {} if h_prev is None else {"first_step": min(h_prev, t_next - t)}
            solver = RK45(rhs, t, y, t_next, rtol=stepper.rtol, atol=stepper.atol,
                          max_step=stepper.max_step, **kw)
            while solver.status == "running":
                with np.errstate(over="ignore", invalid="ignore"):
                    msg = solver.step()
                if solver.status == "failed":
                    return _stop(times, out, UNDERFLOW, str(msg), nfev + solver.nfev, solver.t, tail)
                if bad(solver.y):
                    return _stop(times, out, BLOWUP, f"enstrophy threshold crossed near t={solver.t:.6g}",
                                 nfev + solver.nfev, solver.t_old or t, tail)
                if solver.step_size is not None and solver.step_size < stepper.min_step \
                        and solver.t < t_next:
                    return _stop(times, out, UNDERFLOW, f"step {solver.step_size:.3g} below minimum",
                                 nfev + solver.nfev, solver.t, tail)
                if solver.t < t_next and solver.step_size:
                    h_prev = solver.step_size
            nfev += solver.nfev
            y = solver.y.copy()
        t = t_next
        out.append(y.copy())
    return Trajectory(times, np.array(out), REACHED, "", nfev, float(times[-1]), list(tail))


def _stop(times, out, status, message, nfev, last_time, tail) -> Trajectory:
    n = len(out)
    return Trajectory(times[:n], np.array(out), status, message, nfev, float(last_time), list(tail))


# ----------------------------------------------------------------------
# c3 estimate and the horizon-extension rule


def c3_quotients(system, traj: Trajectory) -> np.ndarray:
    """Per-sample max(0, dE/dt + nu D) / (E^3 + 1) with dE/dt from the right-hand side."""
    vals = []
    for t, g in zip(traj.times, traj.states):
        E = system.enstrophy(g)
        D = system.palinstrophy(g)
        dE = system.enstrophy_rate(t, g)
        vals.append(max(0.0, dE + system.nu * D) / (E ** 3 + 1.0))
    return np.array(vals)


def estimate_c3(system, traj: Trajectory, min_samples: int = 10) -> float:
    if len(traj) < min_samples:
        raise ValueError(f"need at least {min_samples} samples to estimate c3, got {len(traj)}")
    if not np.all(np.isfinite(traj.states)):
        raise ValueError("trajectory contains non-finite states")
    return float(c3_quotients(system, traj).max())


@dataclass(frozen=True)
class HorizonStep:
    T_plus: float
    bound: float


def extend_horizon(T_breve: float, M_breve: float, c3: float, T: float) -> HorizonStep:
    """T+ = min(T + (4 c3)^{-1} (M + 1)^{-2}, T_global) with sup-enstrophy bound sqrt(2) (M + 1)."""
    bound = math.sqrt(2.0) * (M_breve + 1.0)
    if not c3 > 0:
        return HorizonStep(float(T), bound)
    if math.isinf(M_breve):
        return HorizonStep(float(T_breve), bound)
    inc = 1.0 / (4.0 * c3) / (M_breve + 1.0) ** 2
    return HorizonStep(float(min(T_breve + inc, T)), bound)


@dataclass
class Rung:
    T_m: float
    M_m: float
    c3_scheduled: float
    T_plus: float
    bound: float
    sup_enstrophy: float
    c3_realized: float
    condition_met: bool
    bound_ok: bool


@dataclass
class BlowupReport:
    threshold: float
    last_finite_time: float
    enstrophy_tail: list
    message: str = ""


@dataclass
class ContinuationLog:
    rungs: list
    status: str
    T: float
    times: np.ndarray
    enstrophy: np.ndarray
    states: np.ndarray
    blowup: BlowupReport | None = None
    message: str = ""

    @property
    def horizons(self) -> list:
        return [r.T_m for r in self.rungs] + ([self.rungs[-1].T_plus] if self.rungs else [])

    @property
    def conditional_bounds_ok(self) -> bool:
        return all(r.bound_ok for r in self.rungs if r.condition_met)

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "message": self.message,
            "T": self.T,
            "rungs": [asdict(r) for r in self.rungs],
            "blowup": asdict(self.blowup) if self.blowup else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def run_ladder(system, g0, T: float, stepper: StepperConfig | None = None, t0: float = 0.0,
               samples_per_rung: int = 11, blowup_threshold: float = 1e6, safety: float = 2.0,
               c3_floor: float = 0.0, max_rungs: int = 200,
               min_rung: float | None = None) -> ContinuationLog:
    """Integrate rung by rung, scheduling each horizon with the extension rule.

    The scheduled c3 is ``safety`` times the largest of the previous rung's
    realized value, the instantaneous quotient at the rung start and
    ``c3_floor`` (a prior for dissipative runs where the measured value is 0).
    A scheduled rung shorter than ``min_rung`` (default 1e-6 T) means the
    rule has stalled and ends the ladder with status step-underflow.
    """
    min_rung = 1e-6 * (T - t0) if min_rung is None else min_rung
    stepper = stepper or StepperConfig()
    g = np.array(g0, dtype=float)
    t = float(t0)
    rungs: list = []
    times, ens, states = [t], [system.enstrophy(g)], [g.copy()]
    realized_prev = 0.0
    status = REACHED
    message = ""
    blowup = None
    while t < T:
        if len(rungs) >= max_rungs:
            status = RUNG_LIMIT
            message = f"stopped after {max_rungs} rungs at t={t:.6g}"
            break
        M = system.enstrophy(g)
        inst = float(c3_quotients(system, Trajectory(np.array([t]), g[None, :])).max())
        c3_sched = safety * max(realized_prev, inst, c3_floor)
        step = extend_horizon(t, M, c3_sched, T)
        T_plus = step.T_plus
        if T_plus < T and not T_plus - t > min_rung:
            status = UNDERFLOW
            message = f"extension rule stalled at t={t:.6g}: rung length {T_plus - t:.3g}"
            break
        traj = integrate(system, g, t, T_plus, stepper, samples=samples_per_rung,
                         blowup_threshold=blowup_threshold)
        E = np.array([system.enstrophy(s) for s in traj.states])
        if not traj.ok:
            status = traj.status
            message = traj.message
            times.extend(traj.times[1:])
            ens.extend(E[1:])
            states.extend(traj.states[1:])
            if traj.status == BLOWUP:
                blowup = BlowupReport(blowup_threshold, float(traj.times[-1]),
                                      [float(x) for x in traj.enstrophy_tail], traj.message)
            break
        realized = estimate_c3(system, traj, min_samples=min(10, samples_per_rung))
        sup_E = float(E.max())
        rungs.append(Rung(t, M, c3_sched, T_plus, step.bound, sup_E, realized,
                          realized <= c3_sched, sup_E <= step.bound))
        realized_prev = realized
        times.extend(traj.times[1:])
        ens.extend(E[1:])
        states.extend(traj.states[1:])
        g = traj.final.copy()
        t = T_plus
    return ContinuationLog(rungs, status, float(T), np.array(times), np.array(ens), np.array(states),
                           blowup, message)


# ----------------------------------------------------------------------
# audits


@dataclass
class EnergyAudit:
    instantaneous: float  # max relative defect of the balance at samples
    integrated: float  # integrated defect per unit time, relative
    monotone: bool | None  # for f = 0: norm nonincreasing
    apriori_ok: bool
    apriori_margin: float


def energy_audit(system, traj: Trajectory) -> EnergyAudit:
    """Energy identity along a trajectory: instantaneous and time-integrated forms."""
    ts = traj.times
    inst = 0.0
    lhs_rate, rhs_rate = [], []
    for t, g in zip(ts, traj.states):
        bal = system.energy_balance(t, g)
        lhs, rest = bal[0], sum(bal[1:])
        scale = abs(lhs) + sum(abs(x) for x in bal[1:])
        if scale > 0:
            inst = max(inst, abs(lhs - rest) / scale)
        lhs_rate.append(lhs)
        rhs_rate.append(rest)
    half = np.array([0.5 * system.energy(g) for g in traj.states])
    dur = ts[-1] - ts[0]
    integrated = 0.0
    if len(ts) >= 3 and dur > 0:
        acc = cumulative_simpson(np.array(rhs_rate), x=ts, initial=0.0)
        defect = np.abs((half - half[0]) - acc)
        scale = max(half[0], np.abs(acc).max(), 1e-300)
        integrated = float(defect.max() / scale / dur)
    unorm = np.array([system.u_norm(t, g) for t, g in zip(ts, traj.states)])
    fnorm = np.array([system.forcing_norm(t) for t in ts])
    fz = not np.any(fnorm)
    monotone = bool(np.all(np.diff(unorm) <= 1e-12 * max(unorm[0], 1e-300))) if fz else None
    fint = cumulative_simpson(fnorm, x=ts, initial=0.0) if len(ts) >= 3 else np.zeros_like(ts)
    bound = unorm[0] + fint
    margin = float(np.min(bound - unorm))
    return EnergyAudit(inst, integrated, monotone, bool(margin >= -1e-12 * max(bound.max(), 1)), margin)


@dataclass
class GronwallCertificate:
    c4: float
    fit_lhs: np.ndarray
    check_slack: np.ndarray

    @property
    def holds(self) -> bool:
        return bool(np.all(self.check_slack >= 0))


def gronwall_certificate(system, traj: Trajectory, safety: float = 2.0) -> GronwallCertificate:
    """Fit c4 in d/dt|v|^2 + nu |grad v|^2 <= c4 |v|^2 + c4 on even samples, re-check on odd ones."""
    lhs, w = [], []
    for t, g in zip(traj.times, traj.states):
        gdot = system.rhs(t, g)
        lhs.append(2 * float(g @ gdot) + system.nu * system.enstrophy(g))
        w.append(system.energy(g) + 1.0)
    lhs, w = np.array(lhs), np.array(w)
    fit = np.maximum(lhs[0::2], 0) / w[0::2]
    c4 = safety * float(fit.max()) if fit.size else 0.0
    slack = c4 * w[1::2] - lhs[1::2]
    return GronwallCertificate(c4, lhs, slack)


@dataclass
class TwinReport:
    delta: float
    c_hat: float
    sup_w: float
    w_norms: np.ndarray
    times: np.ndarray
    bound_ok: bool
    halving_ratio: float | None = None

    @property
    def linear(self) -> bool:
        return self.halving_ratio is not None and abs(self.halving_ratio - 2.0) <= 0.1


def _twin(system, g0, delta, stepper, T, index, samples):
    base = integrate(system, g0, 0.0, T, stepper, samples)
    g1 = np.array(g0, dtype=float)
    g1[index] += delta
    pert = integrate(system, g1, 0.0, T, stepper, samples)
    w = np.array([l2_norm(system.basis.to_field(a - b)) for a, b in zip(pert.states, base.states)])
    return base.times, w


def twin_run_divergence(system, g0, delta: float, T: float, stepper: StepperConfig | None = None,
                        index: int = 0, samples: int = 21, check_halving: bool = True) -> TwinReport:
    """Run the problem and a delta-perturbed copy; fit the exponential rate of |u1 - u2|."""
    if delta < 0:
        raise ValueError("perturbation scale must be nonnegative")
    ts, w = _twin(system, g0, delta, stepper, T, index, samples)
    if delta == 0 or w[0] == 0:
        return TwinReport(delta, 0.0, float(w.max()), w, ts, bool(np.all(w == 0)), None)
    with np.errstate(divide="ignore"):
        rates = np.log(w[1:] / w[0]) / ts[1:]
    c_hat = float(np.max(rates))
    ok = bool(np.all(w <= w[0] * np.exp(c_hat * ts) * (1 + 1e-9)))
    ratio = None
    if check_halving:
        _, w_half = _twin(system, g0, delta / 2, stepper, T, index, samples)
        ratio = float(w.max() / w_half.max())
    return TwinReport(delta, c_hat, float(w.max()), w, ts, ok, ratio)


# ----------------------------------------------------------------------
# trajectory CSV

CSV_COLUMNS = ["t", "u_l2", "v_l2", "enstrophy_u", "enstrophy_v", "energy_residual", "q_norm",
               "orth_defect"]


def trajectory_rows(system, traj: Trajectory, residuals: bool = True) -> list:
    rows = []
    for t, g in zip(traj.times, traj.states):
        u = system.reconstruct_u(g, t)
        v = system.reconstruct_v(g)
        if residuals:
            rep = system.q_residual(t, g)
            energy, qn, orth = rep.energy_defect, rep.q_norm, rep.orth_defect
        else:
            energy, qn, orth = math.nan, math.nan, math.nan
        rows.append([float(t), l2_norm(u), l2_norm(v), enstrophy(u), system.enstrophy(g), energy, qn,
                     orth])
    return rows


def write_trajectory_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
