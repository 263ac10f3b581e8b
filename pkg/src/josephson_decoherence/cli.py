"""Command-line front end.

    python -m josephson_decoherence <command> --config run.json --out DIR

Every run writes its artifacts plus a copy of the config into ``DIR``.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bosonic, config, core_model, lindblad, noise_rates, semiclassical, trap
from .exceptions import ConfigError, NumericalError
from .lindblad import format_float

log = logging.getLogger("josephson_decoherence")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


# ------------------------------------------------------------------ helpers

def model_from(block) -> core_model.ModelParams:
    if "U" in block and "u" in block:
        raise ConfigError("config field 'model': give either U or u, not both")
    J = block.get("J", 1.0)
    eps = block.get("epsilon", 0.0)
    try:
        if "u" in block:
            return core_model.ModelParams.from_u(block["N"], block["u"], epsilon=eps, J=J)
        return core_model.ModelParams(N=block["N"], epsilon=eps, J=J, U=block.get("U", 0.0))
    except ValueError as exc:
        raise ConfigError(f"config field 'model': {exc}") from exc


def noise_from(block) -> lindblad.NoiseChannels:
    block = dict(block or {})
    g = block.pop("gamma_loss", None)
    if g is not None:
        if "gammaL" in block or "gammaR" in block:
            raise ConfigError("config field 'noise': gamma_loss conflicts with gammaL/gammaR")
        block["gammaL"] = block["gammaR"] = g
    return lindblad.NoiseChannels(**block)


def trap_from(block, N=None, V0=None) -> trap.TrapSpec:
    kw = {}
    if "mass_kg" in block:
        kw["mass"] = block["mass_kg"]
    if "a_s_m" in block:
        kw["a_s"] = block["a_s_m"]
    if "transverse" in block:
        kw["transverse"] = block["transverse"]
    N = block.get("N") if N is None else N
    V0 = block.get("V0_hz") if V0 is None else V0
    if N is None or V0 is None:
        raise ConfigError("config field 'trap': N and V0_hz are required here")
    return trap.TrapSpec(d=block["d_m"], V0=V0, omega_x=2 * np.pi * block["omega_x_hz"],
                         omega_perp=2 * np.pi * block["omega_perp_hz"], N=N, **kw)


def grid_from(block):
    if not block:
        return None
    return trap.Grid(points=block.get("points", 2048), extent=block.get("extent_m"))


def time_grid(block):
    return np.linspace(0.0, block["t_end"], block["points"])


def initial_state(block, p: core_model.ModelParams):
    block = block or {}
    kind = block.get("state", "ground")
    H = core_model.build_hamiltonian(p)
    if kind == "ground":
        return core_model.ground_state(H).psi
    if kind == "thermal":
        return core_model.thermal_state(H, block.get("T", 0.0))
    if kind == "coherent":
        return core_model.coherent_state(p.N, block.get("theta", np.pi / 2), block.get("phi", 0.0))
    n_left = block.get("n_left", p.N // 2)
    if n_left > p.N:
        raise ConfigError("config field 'initial.n_left': exceeds N")
    return core_model.fock_state(p.N, n_left)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


# ----------------------------------------------------------------- commands

def cmd_ground(cfg, out: Path, args=None):
    p = model_from(cfg["model"])
    cp = core_model.characteristic_params(p)
    gs = core_model.ground_state(core_model.build_hamiltonian(p))
    report = {"N": p.N, "J": p.J, "U": p.U, "epsilon": p.epsilon, "u": cp.u, "xi": cp.xi,
              "xi2": cp.xi ** 2, "omegaJ": cp.omega_J, "eps_c": cp.eps_c, "regime": cp.regime,
              "ground_energy": gs.energy, "degenerate": gs.degenerate,
              "g1_ground": core_model.coherence_g1(gs.psi)}
    if "thermal" in cfg:
        T = cfg["thermal"]["T"]
        rho = core_model.thermal_state(core_model.build_hamiltonian(p), T)
        report["T"] = T
        report["g1_thermal"] = core_model.coherence_g1(rho)
        report["n_thermal"] = core_model.thermal_occupation(cp.omega_J, T)
    write_json(out / "report.json", report)
    return report


def _overlay_columns(res, p, nc, names):
    cp = core_model.characteristic_params(p)
    t = res.t
    extra = {}
    g0 = res.g1[0]
    if "single_particle" in names:
        # dashed reference of a non-interacting gas under the same rotation rate
        gamma = max(nc.rotation)
        extra["g1_single_particle"] = g0 * np.exp(-gamma * t)
    if "bosonic" in names:
        rate = np.zeros_like(t)
        g1, g2, g3 = nc.rotation
        if g3:
            rate += bosonic.phase_noise_rate(g3, cp.xi, cp.omega_J)(t)
        if g2:
            rate += bosonic.number_noise_rate(g2, cp.xi, cp.omega_J)(t)
        gl = 0.5 * (nc.gammaL + nc.gammaR)
        if gl:
            rate += bosonic.loss_decoherence_estimate(gl, cp.xi, p.N, cp.omega_J)(t)
        # cumulative trapezoid of the predicted rate
        integral = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(t))])
        extra["Gamma_bosonic"] = rate
        extra["g1_bosonic"] = g0 * np.exp(-integral)
    return extra


def cmd_evolve(cfg, out: Path, args=None):
    t = time_grid(cfg["time"])
    integ = cfg.get("integration", {})
    runs = cfg.get("runs") or [{"label": "run"}]
    summary = {}
    for run in runs:
        p = model_from(config.merge(cfg["model"], run.get("model", {})))
        nc = noise_from(config.merge(cfg.get("noise", {}), run.get("noise", {})))
        rho0 = initial_state(cfg.get("initial"), p)
        log.info("evolve %s: N=%d u=%g %s", run["label"], p.N, p.u, nc)
        res = lindblad.evolve(rho0, p, nc, t, tol=integ.get("tol", 1e-9),
                              method=integ.get("method", "DOP853"))
        res.extra.update(_overlay_columns(res, p, nc, cfg.get("overlay", [])))
        res.to_csv(out / f"evolution_{run['label']}.csv")
        summary[run["label"]] = {
            "g1_final": res.g1[-1], "N_mean_final": res.N_mean[-1],
            "trace_error": float(np.max(np.abs(res.trace - 1))),
            "min_eigenvalue": float(np.nanmin(res.min_eigenvalue)),
        }
    write_json(out / "summary.json", summary)
    return summary


def cmd_semiclassical(cfg, out: Path, args=None):
    p = model_from(cfg["model"])
    noise = cfg.get("noise", {})
    gammas = tuple(noise.get(k, 0.0) for k in ("gamma1", "gamma2", "gamma3"))
    ens = cfg.get("ensemble", {})
    seed = args.seed if args is not None and args.seed is not None else cfg.get("seed", 0)
    threads = args.threads if args is not None and args.threads else 1
    try:
        res = semiclassical.simulate(p, gammas, time_grid(cfg["time"]), M=ens.get("M", 10_000),
                                     seed=seed, dt=ens.get("dt"), threads=threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res.to_csv(out / "semiclassical.csv")
    return res


def _v0_values(spec):
    if isinstance(spec, list):
        return [float(v) for v in spec]
    return list(np.linspace(spec["start"], spec["stop"], spec["num"]))


def cmd_sweep(cfg, out: Path, args=None):
    threads = args.threads if args is not None and args.threads else 1
    V0 = _v0_values(cfg["V0_hz"])
    base = trap_from(cfg["trap"], N=cfg["N"][0], V0=V0[0])
    rows = trap.sweep(base, V0, cfg["N"], grid=grid_from(cfg.get("grid")), threads=threads)
    write_csv(out / "sweep.csv", trap.SWEEP_COLUMNS, rows)
    summary = {}
    for N in cfg["N"]:
        sub = [r for r in rows if r["N"] == N]
        valid = [r for r in sub if r["valid"]]
        summary[str(N)] = {
            "validity_boundary_V0_hz": trap.validity_boundary(sub),
            "max_omegaJ_valid_hz": max((r["omegaJ"] for r in valid), default=None),
            "any_loss_enhanced_valid": any(r["loss_enhanced"] for r in valid),
            "any_fock_valid": any(r["fock"] for r in valid),
        }
    write_json(out / "summary.json", summary)
    return rows


def cmd_rates(cfg, out: Path, args=None):
    nm = cfg["noise_model"]
    kw = {k: nm[k] for k in ("B_pp", "eta", "B_mp", "mu_F", "F") if k in nm}
    if "lambda_c_m" in nm:
        kw["lambda_c"] = nm["lambda_c_m"]
    model = noise_rates.NoiseModel(kind=nm["kind"], **kw)
    report = {"kind": model.kind}
    d = cfg.get("d_m") or (cfg["trap"]["d_m"] if "trap" in cfg else None)
    if model.kind == "johnson_exp_corr":
        if "trap" not in cfg:
            raise ConfigError("config field 'trap': required for johnson_exp_corr")
        spec = trap_from(cfg["trap"])
        x, rL, rR = noise_rates.trap_mode_densities(spec, grid_from(cfg.get("grid")))
        gp = noise_rates.dephasing_rate(model, x, rL, rR, d=spec.d)
    elif model.kind == "technical_slope":
        if d is None:
            raise ConfigError("config field 'd_m': required for technical_slope")
        gp = noise_rates.dephasing_rate(model, d=d)
    else:
        gp = noise_rates.dephasing_rate(model)
    report["gamma_p_per_s"] = gp
    report["gamma_loss_per_s"] = noise_rates.loss_rate(model)
    if "J_hz" in cfg:
        report["gamma3_J"] = noise_rates.rate_in_units_of_J(gp, cfg["J_hz"])
        report["gamma_loss_J"] = noise_rates.rate_in_units_of_J(report["gamma_loss_per_s"], cfg["J_hz"])
    write_json(out / "rates.json", report)
    return report


def read_lifetime_csv(path, layer):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        z0 = [float(r["z0_um"]) * 1e-6 for r in rows]
        tau = [float(r["tau_s"]) for r in rows]
        sigma = [float(r["sigma_s"]) for r in rows]
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read lifetime data {path}: {exc}") from exc
    return noise_rates.LifetimeDataset(z0=z0, tau=tau, sigma=sigma, layer=layer)


def cmd_lifetime(cfg, out: Path, args=None, config_dir=Path(".")):
    lb = cfg.get("layer", {})
    layer = noise_rates.SurfaceLayer(
        h=lb.get("h_m", 0.5e-6), delta=lb.get("delta_m", 130e-6), T=lb.get("T_K", 400.0),
        omega=2 * np.pi * lb.get("omega_hz", 500e3))
    data_path = getattr(args, "data", None) or cfg.get("data_csv")
    if data_path:
        path = Path(data_path)
        if not path.is_absolute() and getattr(args, "data", None) is None:
            path = config_dir / path
        data = read_lifetime_csv(path, layer)
    elif "synthetic" in cfg:
        s = cfg["synthetic"]
        z0 = np.asarray(s["z0_um"]) * 1e-6
        c_total = s["c_total_um2_s"] * 1e-12
        c1 = noise_rates.johnson_c1(layer) if s.get("thin_layer") else None
        seed = args.seed if args is not None and args.seed is not None else cfg.get("seed", 0)
        data = noise_rates.synthetic_lifetimes(z0, c_total, s.get("rel_noise", 0.0), seed=seed,
                                               c1=c1, layer=layer)
        write_csv(out / "data.csv", ("z0_um", "tau_s", "sigma_s"),
                  [{"z0_um": z * 1e6, "tau_s": t, "sigma_s": e}
                   for z, t, e in zip(data.z0, data.tau, data.sigma)])
    else:
        raise ConfigError("config needs 'data_csv', 'synthetic' or --data")
    try:
        fit = noise_rates.fit_lifetimes(data)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = fit.report()
    report["c1_cascade"] = noise_rates.johnson_c1(layer, cascade=True) * 1e12
    report["n_th"] = layer.n_th
    write_json(out / "lifetime.json", report)
    return report


COMMANDS = {"ground": cmd_ground, "evolve": cmd_evolve, "semiclassical": cmd_semiclassical,
            "sweep": cmd_sweep, "rates": cmd_rates, "lifetime": cmd_lifetime}


def build_parser():
    parser = argparse.ArgumentParser(prog="josephson_decoherence",
                                     description="Double-well BEC decoherence simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory (default out/<command>)")
        sp.add_argument("--seed", type=int, default=None, help="master RNG seed")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "lifetime":
            sp.add_argument("--data", default=None, help="lifetime CSV (z0_um, tau_s, sigma_s)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = config.load(args.config, args.command)
        out = Path(args.out or Path("out") / args.command)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "config.json", cfg)
        kwargs = {"config_dir": Path(args.config).parent} if args.command == "lifetime" else {}
        COMMANDS[args.command](cfg, out, args, **kwargs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
