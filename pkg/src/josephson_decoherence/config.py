"""JSON run configurations: schemas, loading and validation."""
from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .exceptions import ConfigError

_num = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


MODEL = _obj({
    "N": {"type": "integer", "minimum": 1, "description": "total atom number"},
    "epsilon": {**_num, "description": "energy imbalance, units of J"},
    "J": {**_pos, "description": "tunnelling energy (unit of energy)"},
    "U": {**_nonneg, "description": "on-site interaction, units of J"},
    "u": {**_nonneg, "description": "N U / J, alternative to U"},
}, ["N"])

NOISE = _obj({
    "gamma1": {**_nonneg, "description": "S1 rotation noise, units of J"},
    "gamma2": {**_nonneg, "description": "S2 rotation (number) noise, units of J"},
    "gamma3": {**_nonneg, "description": "S3 rotation (phase) noise, units of J"},
    "gammaL": {**_nonneg, "description": "left-well loss rate, units of J"},
    "gammaR": {**_nonneg, "description": "right-well loss rate, units of J"},
    "gamma_loss": {**_nonneg, "description": "loss rate applied to both wells, units of J"},
})

TIME = _obj({
    "t_end": {**_pos, "description": "final time, units of 1/J"},
    "points": {"type": "integer", "minimum": 2, "description": "samples including t=0"},
}, ["t_end", "points"])

INITIAL = _obj({
    "state": {"enum": ["ground", "thermal", "coherent", "fock"]},
    "T": {**_nonneg, "description": "temperature, units of J (thermal state)"},
    "theta": {"type": "number", "minimum": 0, "maximum": 3.141592653589793,
              "description": "polar angle, rad (coherent state)"},
    "phi": {**_num, "description": "relative phase, rad (coherent state)"},
    "n_left": {"type": "integer", "minimum": 0, "description": "left-well atoms (Fock state)"},
})

INTEGRATION = _obj({
    "tol": {**_pos, "description": "local error bound, units of 1 (per 1/J)"},
    "method": {"enum": ["DOP853", "RK45"]},
})

OVERLAYS = ["single_particle", "bosonic"]

RUN = _obj({
    "label": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
    "model": {"type": "object"},
    "noise": {"type": "object"},
}, ["label"])

TRAP = _obj({
    "d_m": {**_pos, "description": "well separation, m"},
    "omega_x_hz": {**_pos, "description": "longitudinal trap frequency omega_x/2pi, Hz"},
    "omega_perp_hz": {**_pos, "description": "transverse trap frequency omega_perp/2pi, Hz"},
    "V0_hz": {**_nonneg, "description": "barrier height E/h, Hz"},
    "N": {"type": "integer", "minimum": 1},
    "mass_kg": {**_pos, "description": "atomic mass, kg"},
    "a_s_m": {**_nonneg, "description": "s-wave scattering length, m"},
    "transverse": {"enum": ["variational", "fixed"]},
}, ["d_m", "omega_x_hz", "omega_perp_hz"])

GRID = _obj({
    "points": {"type": "integer", "minimum": 16, "multipleOf": 2},
    "extent_m": {**_pos, "description": "full grid width, m"},
})

RANGE = _obj({"start": _nonneg, "stop": _nonneg, "num": {"type": "integer", "minimum": 1}},
             ["start", "stop", "num"])

SCHEMAS = {
    "ground": _obj({
        "model": MODEL,
        "noise": NOISE,
        "thermal": _obj({"T": {**_nonneg, "description": "temperature, units of J"}}, ["T"]),
    }, ["model"]),
    "evolve": _obj({
        "model": MODEL,
        "noise": NOISE,
        "initial": INITIAL,
        "time": TIME,
        "integration": INTEGRATION,
        "overlay": {"type": "array", "items": {"enum": OVERLAYS}, "uniqueItems": True},
        "runs": {"type": "array", "items": RUN, "minItems": 1},
    }, ["model", "time"]),
    "semiclassical": _obj({
        "model": MODEL,
        "noise": _obj({k: NOISE["properties"][k] for k in ("gamma1", "gamma2", "gamma3")}),
        "time": TIME,
        "ensemble": _obj({
            "M": {"type": "integer", "minimum": 1, "description": "trajectories"},
            "dt": {**_pos, "description": "step, units of 1/J"},
        }),
        "seed": {"type": "integer", "minimum": 0},
    }, ["model", "time"]),
    "sweep": _obj({
        "trap": TRAP,
        "N": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "V0_hz": {"oneOf": [{"type": "array", "items": _nonneg, "minItems": 1}, RANGE],
                  "description": "barrier heights E/h, Hz"},
        "grid": GRID,
    }, ["trap", "N", "V0_hz"]),
    "rates": _obj({
        "noise_model": _obj({
            "kind": {"enum": ["johnson_exp_corr", "technical_slope", "flat_spectrum"]},
            "B_pp": {**_nonneg, "description": "longitudinal field spectrum, T^2/Hz"},
            "lambda_c_m": {**_pos, "description": "correlation length, m"},
            "eta": {**_nonneg, "description": "slope-force noise, (J/m)^2 s"},
            "B_mp": {**_nonneg, "description": "transverse field spectrum at omega_Z, T^2/Hz"},
            "mu_F": {**_pos, "description": "magnetic moment, J/T"},
            "F": {"type": "integer", "minimum": 1},
        }, ["kind"]),
        "trap": TRAP,
        "d_m": {**_pos, "description": "well separation for the slope model, m"},
        "J_hz": {**_pos, "description": "tunnelling energy E/h for unit conversion, Hz"},
        "grid": GRID,
    }, ["noise_model"]),
    "lifetime": _obj({
        "data_csv": {"type": "string", "description": "CSV with z0_um, tau_s, sigma_s"},
        "synthetic": _obj({
            "z0_um": {"type": "array", "items": _pos, "minItems": 3},
            "c_total_um2_s": _pos,
            "rel_noise": _nonneg,
            "thin_layer": {"type": "boolean"},
        }, ["z0_um", "c_total_um2_s"]),
        "layer": _obj({
            "h_m": {**_pos, "description": "layer thickness, m"},
            "delta_m": {**_pos, "description": "skin depth at T_K and omega_hz, m"},
            "T_K": {**_pos, "description": "layer temperature, K"},
            "omega_hz": {**_pos, "description": "Larmor frequency omega/2pi, Hz"},
        }),
        "seed": {"type": "integer", "minimum": 0},
    }),
}


def validate(command: str, cfg: dict) -> dict:
    schema = SCHEMAS[command]
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field '{where}': {e.message}")
    if command == "evolve":
        for run in cfg.get("runs", []):
            validate_block("model", _merge(cfg["model"], run.get("model", {})), f"runs[{run['label']}].model")
            validate_block("noise", _merge(cfg.get("noise", {}), run.get("noise", {})), f"runs[{run['label']}].noise")
    return cfg


def validate_block(kind, block, where):
    schema = {"model": MODEL, "noise": NOISE}[kind]
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(schema).iter_errors(block))
    if err is not None:
        path = ".".join(str(p) for p in err.absolute_path)
        raise ConfigError(f"config field '{where}{'.' + path if path else ''}': {err.message}")


def _merge(base, override):
    out = copy.deepcopy(base)
    out.update(override)
    return out


def load(path, command: str) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return validate(command, cfg)


merge = _merge
