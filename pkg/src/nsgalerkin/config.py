"""Run configuration, named presets, and problem assembly."""
from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .continuation import StepperConfig
from .errors import ConfigError
from .galerkin import DirectSystem, LiftedSystem, config_fingerprint
from .lift import MAX_ORDER, ForcingSpec, build_lift
from .spectral import BasisSpec, SpectralField, TorusSpec, enstrophy, is_solenoidal, l2_norm

FORMAT_VERSION = 1
ENV_PREFIX = "NSG_"

STEPPER_KEYS = {"mode", "h", "rtol", "atol", "max_step", "min_step"}
DEFAULTS = {
    "preset": "taylor-green",
    "L": 2 * math.pi,
    "K": 4,
    "n": None,
    "nu": 0.1,
    "J": 3,
    "T": 1.0,
    "formulation": "lifted",
    "nonlinear": "convolution",
    "stepper": {"mode": "adaptive", "h": 1e-3, "rtol": 1e-8, "atol": 1e-10},
    "samples": 11,
    "samples_per_rung": 11,
    "data_file": None,
    "amplitude": None,
    "forcing": [],
    "seed": 0,
    "blowup_threshold": 1e6,
    "c3_floor": 0.0,
    "out": "out",
    "residuals": True,
    "test_hooks": [],
    "exhaust": None,
}

PRESETS = {
    "zero": {"K": 2, "nu": 0.1, "J": 3, "T": 1.0},
    "single-mode": {"K": 1, "nu": 1.0, "J": 2, "T": 1.0},
    "taylor-green": {"K": 4, "nu": 0.1, "J": 3, "T": 1.0},
    "random-8": {"K": 4, "nu": 0.1, "J": 3, "T": 1.0, "amplitude": 0.5},
    "clay-class-small": {"K": 4, "nu": 0.05, "J": 1, "T": 5.0, "amplitude": 0.09,
                         "formulation": "direct", "samples_per_rung": 21,
                         "c3_floor": 0.25},
    "stress-large": {"K": 2, "nu": 0.01, "J": 1, "T": 1.0, "amplitude": 200.0, "formulation": "direct",
                     "stepper": {"mode": "fixed", "h": 0.5}, "samples": 3, "samples_per_rung": 3,
                     "residuals": False},
    "bump-exhaustion": {"K": 1, "nu": 0.05, "T": 0.5, "formulation": "direct",
                        "exhaust": {"radii": [3.0, 10.5, 12.0], "grids": [32, 64, 64],
                                    "profile": {"kind": "bump", "amplitude": 0.5, "width": 0.75}}},
}


def _parse_env(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def resolve_config(user: dict | None = None, env: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults < preset < user JSON < environment (NSG_*) < command-line overrides."""
    user = dict(user or {})
    unknown = set(user) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    env = os.environ if env is None else env
    env_vals = {}
    for key, value in env.items():
        if key.startswith(ENV_PREFIX):
            name = key[len(ENV_PREFIX):].lower()
            if name not in DEFAULTS:
                raise ConfigError(f"environment variable {key} does not name a config key")
            env_vals[name] = _parse_env(value)
    layered = {**user, **env_vals, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    preset = layered.get("preset", DEFAULTS["preset"])
    if preset not in PRESETS:
        raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cfg = copy.deepcopy(DEFAULTS)
    for src in (PRESETS[preset], layered):
        for k, v in src.items():
            if k == "stepper":
                cfg["stepper"] = {**cfg["stepper"], **v}
            else:
                cfg[k] = copy.deepcopy(v)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    bad = set(cfg["stepper"]) - STEPPER_KEYS
    if bad:
        raise ConfigError(f"stepper: unknown key(s) {', '.join(sorted(bad))}")
    if not isinstance(cfg["nu"], (int, float)) or not cfg["nu"] > 0:
        raise ConfigError(f"nu: viscosity must be positive, got {cfg['nu']!r}")
    if not isinstance(cfg["J"], int) or not 1 <= cfg["J"] <= MAX_ORDER:
        raise ConfigError(f"J: lift order must be an integer in [1, {MAX_ORDER}], got {cfg['J']!r}")
    if not isinstance(cfg["K"], (int, float)) or cfg["K"] < 1:
        raise ConfigError(f"K: basis radius must be >= 1, got {cfg['K']!r}")
    if not cfg["L"] > 0:
        raise ConfigError(f"L: torus period must be positive, got {cfg['L']!r}")
    if not cfg["T"] > 0:
        raise ConfigError(f"T: horizon must be positive, got {cfg['T']!r}")
    if cfg["formulation"] not in ("lifted", "direct"):
        raise ConfigError(f"formulation: expected 'lifted' or 'direct', got {cfg['formulation']!r}")
    if cfg["nonlinear"] not in ("convolution", "tensor"):
        raise ConfigError(f"nonlinear: expected 'convolution' or 'tensor', got {cfg['nonlinear']!r}")
    if cfg["n"] is not None and (not isinstance(cfg["n"], int) or cfg["n"] < 1):
        raise ConfigError(f"n: basis size must be a positive integer, got {cfg['n']!r}")
    if int(cfg["samples"]) < 2:
        raise ConfigError("samples: need at least 2 sample times")
    if not cfg["c3_floor"] >= 0:
        raise ConfigError("c3_floor: must be nonnegative")
    if not cfg["blowup_threshold"] > 0:
        raise ConfigError("blowup_threshold: must be positive")
    try:
        StepperConfig(**cfg["stepper"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"stepper: {exc}") from exc
    for i, term in enumerate(cfg["forcing"]):
        if set(term) != {"k", "amplitude", "coeffs"}:
            raise ConfigError(f"forcing[{i}]: expected keys k, amplitude, coeffs")
        if not any(term["k"]):
            raise ConfigError(f"forcing[{i}]: mean-free data required, k = (0, 0, 0) is not allowed")
    hooks = set(cfg["test_hooks"]) - {"corrupt-tensor"}
    if hooks:
        raise ConfigError(f"test_hooks: unknown hook(s) {', '.join(sorted(hooks))}")


def config_hash(cfg: dict) -> str:
    body = {k: v for k, v in cfg.items() if k != "out"}
    return config_fingerprint(body)


# ----------------------------------------------------------------------
# initial data


def taylor_green(torus: TorusSpec, amplitude: float = 1.0) -> SpectralField:
    """(sin x cos y, -cos x sin y, 0) scaled to the torus."""
    c = {}
    for sx in (1, -1):
        for sy in (1, -1):
            c[(sx, sy, 0)] = amplitude * np.array([sx / 4j, -sy / 4j, 0])
    return SpectralField.from_dict(torus, c)


def single_mode(torus: TorusSpec, amplitude: float = 1.0) -> SpectralField:
    """(0, sin x, 0)."""
    return SpectralField.from_dict(torus, {(1, 0, 0): [0, amplitude / 2j, 0],
                                           (-1, 0, 0): [0, -amplitude / 2j, 0]})


def random_eight(torus: TorusSpec, seed: int, amplitude: float) -> SpectralField:
    """Random combination of the first 8 basis functions (the two lowest pairs of the |k| = 1 shell)."""
    basis = BasisSpec(torus, 1, 8)
    g = np.random.default_rng(seed).standard_normal(8) * amplitude
    return basis.to_field(g)


def clay_small(torus: TorusSpec, amplitude: float, band: int = 2) -> SpectralField:
    """Curl of a (1+|x|^2)^{-1/2} potential: a (1+|x|)^{-2} envelope, band-limited and scaled."""
    from .exhaust import Profile, grid_coordinates
    G = 16
    t = torus.with_grid(G)
    vals = Profile("clay", 1.0, 1.0)(grid_coordinates(t))
    u = SpectralField.from_grid(torus, vals, band=band, drop_tol=-1).without_mean()
    from .spectral import leray_project
    u = leray_project(u).hermitian_part().prune(0.0)
    # amplitude fixes the enstrophy: |grad u|^2 = amplitude^2
    return u * (amplitude / math.sqrt(enstrophy(u)))


def stress_field(torus: TorusSpec, seed: int, amplitude: float) -> SpectralField:
    basis = BasisSpec(torus, 2)
    g = np.random.default_rng(seed).standard_normal(basis.n)
    return basis.to_field(g / np.linalg.norm(g) * amplitude)


def initial_data(cfg: dict, torus: TorusSpec) -> SpectralField:
    preset = cfg["preset"]
    amp = cfg["amplitude"]
    if cfg["data_file"]:
        with open(cfg["data_file"]) as fh:
            u0 = SpectralField.from_json(fh.read())
        if u0.torus.L != torus.L:
            raise ConfigError("data_file: stored period differs from L")
    elif preset in ("zero", "bump-exhaustion"):
        u0 = SpectralField.zeros(torus)
    elif preset == "single-mode":
        u0 = single_mode(torus, 1.0 if amp is None else amp)
    elif preset == "taylor-green":
        u0 = taylor_green(torus, 1.0 if amp is None else amp)
    elif preset == "random-8":
        u0 = random_eight(torus, cfg["seed"], amp)
    elif preset == "clay-class-small":
        u0 = clay_small(torus, amp)
    elif preset == "stress-large":
        u0 = stress_field(torus, cfg["seed"], amp)
    else:  # pragma: no cover - guarded by validate
        raise ConfigError(f"preset: {preset!r}")
    if len(u0) and np.any(np.abs(u0.mean_mode()) > 0):
        raise ConfigError("initial data: mean-free data required (nonzero k = 0 mode)")
    if len(u0) and not is_solenoidal(u0, 1e-12):
        raise ConfigError("initial data: field is not solenoidal")
    return u0


def forcing_spec(cfg: dict, torus: TorusSpec) -> ForcingSpec:
    terms = [(t["k"], np.array(t["amplitude"], dtype=complex), t["coeffs"]) for t in cfg["forcing"]]
    return ForcingSpec.from_terms(torus, terms) if terms else ForcingSpec.zero(torus)


@dataclass
class Problem:
    cfg: dict
    torus: TorusSpec
    basis: BasisSpec
    u0: SpectralField
    forcing: ForcingSpec
    system: object
    lift: object = None

    @property
    def stepper(self) -> StepperConfig:
        return StepperConfig(**self.cfg["stepper"])

    def initial_state(self) -> np.ndarray:
        if self.cfg["formulation"] == "lifted":
            return np.zeros(self.basis.n)
        return self.basis.project(self.u0)

    def data_summary(self) -> dict:
        """Norms that play the role of the data bound b."""
        fn = [self.forcing.norm(t) for t in np.linspace(0, self.cfg["T"], 5)] if self.forcing.fields else [0]
        return {"u0_l2": l2_norm(self.u0), "u0_enstrophy": enstrophy(self.u0), "f_l2_max": float(max(fn))}


def build_problem(cfg: dict, formulation: str | None = None) -> Problem:
    formulation = formulation or cfg["formulation"]
    cfg = {**cfg, "formulation": formulation}
    torus = TorusSpec(cfg["L"])
    basis = BasisSpec(torus, cfg["K"], cfg["n"])
    u0 = initial_data(cfg, torus)
    forcing = forcing_spec(cfg, torus)
    if forcing.has_mean():
        raise ConfigError("forcing: mean-free data required")
    if formulation == "lifted":
        lift = build_lift(u0, forcing, cfg["J"], cfg["nu"])
        system = LiftedSystem(basis, lift, cfg["nonlinear"])
    else:
        lift = None
        system = DirectSystem(basis, cfg["nu"], forcing, cfg["nonlinear"])
    return Problem(cfg, torus, basis, u0, forcing, system, lift)


def closed_form(cfg: dict, u0: SpectralField, t: float) -> SpectralField | None:
    """Exact solution where one is known (heat decay of a single eigenmode)."""
    if cfg["forcing"] or cfg["data_file"]:
        return None
    if cfg["preset"] == "taylor-green":
        lam = 2 * (2 * math.pi / cfg["L"]) ** 2
    elif cfg["preset"] == "single-mode":
        lam = (2 * math.pi / cfg["L"]) ** 2
    elif cfg["preset"] == "zero":
        lam = 0.0
    else:
        return None
    return u0 * math.exp(-cfg["nu"] * lam * t)
