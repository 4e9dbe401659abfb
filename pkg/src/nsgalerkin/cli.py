"""Command-line front end: ``nsgalerkin {simulate,verify,lift-check,exhaust,oracle}``.

Configuration is layered as defaults < preset < ``--config`` JSON < ``NSG_*``
environment variables < flags.  An environment variable ``NSG_<KEY>`` sets
config key ``<key>``; its value is parsed as JSON when possible (``NSG_NU=0.2``,
``NSG_STEPPER='{"mode": "fixed", "h": 0.01}'``).

Exit status: 0 all checks pass, 1 a check failed, 2 usage or config error,
3 the run ended in blow-up, step-underflow or rung-limit.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import (
    FORMAT_VERSION,
    PRESETS,
    ConfigError,
    build_problem,
    closed_form,
    config_hash,
    resolve_config,
)
from .continuation import (
    REACHED,
    Trajectory,
    energy_audit,
    run_ladder,
    trajectory_rows,
    write_trajectory_csv,
)
from .galerkin import GalerkinState
from .spectral import TorusSpec, l2_norm
from .verify import lift_check, oracle_defect, report_dict, run_verify

log = logging.getLogger("nsgalerkin")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_TERMINAL = 0, 1, 2, 3


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _header(cfg: dict, basis_hash: str | None) -> dict:
    # the output directory is an invocation detail, not part of the run
    body = {k: v for k, v in cfg.items() if k != "out"}
    return {"format_version": FORMAT_VERSION, "config_hash": config_hash(cfg), "basis_hash": basis_hash,
            "config": body}


def _unique_samples(times, states):
    # rung boundaries are shared; keep the first occurrence of each time
    keep = np.r_[True, np.diff(times) > 0]
    return times[keep], states[keep]


def cmd_simulate(cfg: dict, out: Path) -> int:
    prob = build_problem(cfg)
    system = prob.system
    ladder = run_ladder(system, prob.initial_state(), cfg["T"], prob.stepper,
                        samples_per_rung=int(cfg["samples_per_rung"]),
                        blowup_threshold=cfg["blowup_threshold"], c3_floor=cfg["c3_floor"])
    times, states = _unique_samples(ladder.times, ladder.states)
    traj = Trajectory(times, states, ladder.status, ladder.message)
    finite = np.all(np.isfinite(states), axis=1)
    good = Trajectory(times[finite], states[finite])
    rows = trajectory_rows(system, good, residuals=bool(cfg["residuals"]) and ladder.status == REACHED)
    write_trajectory_csv(out / "trajectory.csv", rows)

    chash = config_hash(cfg)
    final = GalerkinState(good.states[-1], float(good.times[-1]))
    _dump(out / "checkpoint.json", system.checkpoint(final, chash))
    cont = {**_header(cfg, system.fingerprint()), **ladder.to_json_dict()}
    _dump(out / "continuation.json", cont)

    report = _header(cfg, system.fingerprint())
    report.update({
        "formulation": cfg["formulation"],
        "n": prob.basis.n,
        "status": ladder.status,
        "message": ladder.message,
        "final_time": final.t,
        "data_summary": prob.data_summary(),
        "rungs": len(ladder.rungs),
        "conditional_bounds_ok": ladder.conditional_bounds_ok,
    })
    exact = closed_form(cfg, prob.u0, final.t)
    if exact is not None:
        u = system.reconstruct_u(final.g, final.t)
        denom = l2_norm(exact)
        err = l2_norm(u - exact)
        report["closed_form_error"] = err / denom if denom > 0 else err
    if ladder.status == REACHED and len(good.times) > 2:
        audit = energy_audit(system, good)
        report["energy_audit"] = {"instantaneous": audit.instantaneous, "integrated": audit.integrated,
                                  "monotone": audit.monotone, "apriori_ok": audit.apriori_ok}
    _dump(out / "report.json", report)
    log.info("simulate: %s at t=%.6g (%d rungs)", ladder.status, final.t, len(ladder.rungs))
    if traj.status != REACHED:
        return EXIT_TERMINAL
    return EXIT_OK


def cmd_verify(cfg: dict, out: Path) -> int:
    results = run_verify(cfg)
    rep = {**_header(cfg, None), **report_dict(results)}
    _dump(out / "verify.json", rep)
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        extra = " (degenerate)" if r.degenerate else ""
        print(f"{flag} {r.name}: defect={r.defect:.3e} tol={r.tol:.1e}{extra}")
    return EXIT_OK if rep["passed"] else EXIT_CHECK


def cmd_lift_check(cfg: dict, out: Path) -> int:
    prob = build_problem(cfg, "lifted")
    rep = {**_header(cfg, prob.basis.fingerprint()), **lift_check(cfg)}
    _dump(out / "lift_check.json", rep)
    print(f"{'PASS' if rep['passed'] else 'FAIL'} lift-check: max theta ratio "
          f"{max(rep['theta_ratios'], default=0.0):.3e}")
    return EXIT_OK if rep["passed"] else EXIT_CHECK


def cmd_oracle(cfg: dict, out: Path, count: int, modes: int) -> int:
    rng = np.random.default_rng(cfg["seed"])
    defect = oracle_defect(TorusSpec(cfg["L"]), rng, n_fields=count, max_modes=modes)
    passed = defect <= 1e-9
    _dump(out / "oracle.json", {**_header(cfg, None), "fields": count, "max_modes": modes,
                                "max_defect": defect, "tol": 1e-9, "passed": passed})
    print(f"{'PASS' if passed else 'FAIL'} oracle: max defect {defect:.3e}")
    return EXIT_OK if passed else EXIT_CHECK


def exhaust_plan(cfg: dict):
    from .continuation import StepperConfig
    from .exhaust import ExhaustionPlan, Profile

    spec = dict(cfg["exhaust"] or PRESETS["bump-exhaustion"]["exhaust"])
    prof = spec.pop("profile", {})
    stepper = {k: v for k, v in cfg["stepper"].items() if k in ("mode", "h", "max_step", "min_step")}
    stepper.setdefault("rtol", min(cfg["stepper"].get("rtol", 1e-7), 1e-7))
    stepper.setdefault("atol", cfg["stepper"].get("atol", 1e-10))
    return ExhaustionPlan(profile=Profile(**prof), nu=cfg["nu"], T=cfg["T"],
                          stepper=StepperConfig(**stepper), **spec)


def cmd_exhaust(cfg: dict, out: Path) -> int:
    from .exhaust import run_exhaustion

    try:
        plan = exhaust_plan(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"exhaust: {exc}") from exc
    report = run_exhaustion(plan)
    data = {**_header(cfg, None), **report.to_json_dict(),
            "strictly_decreasing": report.strictly_decreasing}
    _dump(out / "exhaustion.json", data)
    for rr in report.rungs:
        with open(out / f"rung_{rr.rung}.csv", "w") as fh:
            fh.write("t,point,u1,u2,u3\n")
            for ti, t in enumerate(plan.sample_times):
                for pi in range(len(plan.sample_points)):
                    vals = ",".join(repr(float(x)) for x in rr.values[ti, pi])
                    fh.write(f"{float(t)!r},{pi},{vals}\n")
    print(f"d_n = {report.differences}")
    if report.partial:
        return EXIT_TERMINAL
    return EXIT_OK if report.strictly_decreasing else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsgalerkin", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "verify", "lift-check", "exhaust", "oracle"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--formulation", choices=("lifted", "direct"))
        p.add_argument("--fixed-step", type=float, metavar="H", help="fixed RK4 step instead of adaptive")
        if name == "oracle":
            p.add_argument("--fields", type=int, default=20, help="number of random field pairs")
            p.add_argument("--modes", type=int, default=12, help="max active modes per field")
    return parser


def load_config(args) -> dict:
    user = {}
    if args.config:
        try:
            user = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config file {args.config}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
    overrides = {"preset": args.preset, "seed": args.seed, "formulation": args.formulation,
                 "out": str(args.out) if args.out else None}
    if args.fixed_step is not None:
        if not (math.isfinite(args.fixed_step) and args.fixed_step > 0):
            raise ConfigError(f"--fixed-step: step must be positive, got {args.fixed_step}")
        overrides["stepper"] = {"mode": "fixed", "h": args.fixed_step}
    return resolve_config(user, overrides=overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "lift-check":
            return cmd_lift_check(cfg, out)
        if args.command == "oracle":
            return cmd_oracle(cfg, out, args.fields, args.modes)
        return cmd_exhaust(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
