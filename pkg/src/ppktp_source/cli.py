"""Command-line front end.

Every command writes its output file(s) into ``--out-dir`` and prints the
path(s) written. Exit codes: 0 success, 1 computation error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import ConvergenceError, DomainError, InconsistencyError, InsufficientDataError, SolverError
from .focusing import (fit_rate_scaling, max_coupling_ratio, mode_overlap, optimal_geometry, rate_scaling_residuals,
                       rate_summary, read_rate_csv, read_sweep_csv, sweep_optimum)
from .phasematching import degeneracy_temperature, fwhm_bandwidth_formula, fwhm_bandwidth_numeric, spectrum, tuning_curve
from .sagnac import PHI_MINUS, PHI_PLUS, PSI_MINUS, PSI_PLUS, PumpPreparation, source_state, visibility
from .tomography import (accidentals_per_setting, concurrence_tangle, fidelity, linear_reconstruct, monte_carlo_errors,
                         mle_reconstruct, read_dataset, simulate_counts, state_metrics, subtract_accidentals,
                         write_dataset, write_matrix_csv)

TARGETS = {"psi-": PSI_MINUS, "psi+": PSI_PLUS, "phi-": PHI_MINUS, "phi+": PHI_PLUS}
COMPUTATION_ERRORS = (DomainError, SolverError, ConvergenceError, InconsistencyError, FloatingPointError)


class UsageError(Exception):
    pass


# ----------------------------------------------------------------- output helpers

def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _flatten(obj, prefix=""):
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        elif isinstance(v, (list, tuple)):
            yield key, json.dumps(_jsonable(v))
        else:
            yield key, _jsonable(v)


def _write_report(ctx, name, report):
    """A report as JSON, or as a two-column CSV of flattened keys."""
    report = {"config_hash": ctx.hash, **report}
    path = ctx.out_dir / f"{name}.{ctx.fmt}"
    if ctx.fmt == "json":
        _write_json(path, report)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quantity", "value"])
            for k, v in _flatten(report):
                w.writerow([k, "" if v is None else v])
    return path


def _write_table(ctx, name, columns, rows):
    path = ctx.out_dir / f"{name}.{ctx.fmt}"
    if ctx.fmt == "json":
        _write_json(path, {"config_hash": ctx.hash, "columns": list(columns),
                           "rows": [dict(zip(columns, r)) for r in rows]})
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            w.writerows(rows)
    return path


class _Context:
    def __init__(self, args):
        try:
            self.cfg = cfgmod.load_config(args.config)
        except cfgmod.ConfigError as exc:
            raise UsageError(str(exc)) from None
        if args.seed is not None:
            self.cfg["simulation"]["seed"] = args.seed
        self.hash = cfgmod.config_hash(self.cfg)
        self.out_dir = Path(args.out_dir or self.cfg["output"]["directory"])
        self.fmt = args.format or self.cfg["output"]["format"]
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def seed(self, command):
        seed = self.cfg["simulation"]["seed"]
        if seed is None:
            raise UsageError(f"{command} is stochastic: pass --seed or set simulation.seed in the config")
        return seed


# ----------------------------------------------------------------- commands

def cmd_tuning_curve(ctx, args):
    if not args.t_min < args.t_max:
        raise UsageError(f"--t-min ({args.t_min}) must be below --t-max ({args.t_max})")
    if not args.step > 0:
        raise UsageError("--step must be positive")
    points = tuning_curve(cfgmod.crystal(ctx.cfg), cfgmod.pump(ctx.cfg), args.t_min, args.t_max, args.step)
    columns = ["T_C", "lambda_s_nm", "lambda_i_nm", "degenerate_flag", "root_found", "dk_residual_per_um", "long_axis"]
    rows = [[round(p.temperature, 9), round(p.lambda_s, 6), round(p.lambda_i, 6), int(p.degenerate),
             int(p.root_found), float(f"{p.dk_residual:.3e}"), p.long_axis] for p in points]
    print(_write_table(ctx, "tuning_curve", columns, rows))
    missing = [p.temperature for p in points if not p.root_found]
    if missing:
        print(f"error: no phasematched wavelength at {len(missing)} temperature(s), "
              f"first at {missing[0]} °C (flagged root_found=0)", file=sys.stderr)
        return 1
    return 0


def cmd_spectrum(ctx, args):
    if args.points < 3:
        raise UsageError("--points must be at least 3")
    crystal, pump = cfgmod.crystal(ctx.cfg), cfgmod.pump(ctx.cfg)
    temperature = degeneracy_temperature(crystal, pump) if args.temperature is None else args.temperature
    centre = 2 * pump.wavelength_nm
    lo = centre - 2.0 if args.lambda_min is None else args.lambda_min
    hi = centre + 2.0 if args.lambda_max is None else args.lambda_max
    if not lo < hi:
        raise UsageError("--lambda-min must be below --lambda-max")
    curve = spectrum(crystal, pump, temperature, np.linspace(lo, hi, args.points))
    rows = [[round(float(x), 6), round(float(y), 9)] for x, y in zip(curve.wavelengths, curve.intensity)]
    print(_write_table(ctx, "spectrum", ["lambda_nm", "intensity_rel"], rows))
    fwhm = fwhm_bandwidth_numeric(crystal, pump, temperature)
    print(f"FWHM = {fwhm:.6f} nm at T = {temperature:.4f} °C "
          f"(closed form {fwhm_bandwidth_formula(crystal.length_mm):.6f} nm)")
    return 0


def run_simulation(cfg, seed):
    """End-to-end source simulation; returns (report, source ρ, MLE ρ, dataset)."""
    crystal, pump, imp = cfgmod.crystal(cfg), cfgmod.pump(cfg), cfgmod.imperfections(cfg)
    src, sim = cfg["source"], cfg["simulation"]
    temperature = src["temperature_C"]
    if temperature is None:
        temperature = degeneracy_temperature(crystal, pump)
    geom = optimal_geometry(crystal, pump, src["focus_objective"], temperature)

    # detected rates from the √L scaling law at the configured pump power
    R_c = src["rate_coefficient"] * math.sqrt(crystal.length_mm) * pump.power_mw
    eta0 = max_coupling_ratio(imp.transmission(2 * pump.wavelength_nm), imp.detector_efficiency)
    eta_c = eta0 * src["mode_overlap"]
    R_single = R_c / eta_c
    bandwidth = src["bandwidth_nm"] or fwhm_bandwidth_formula(crystal.length_mm)
    rates = rate_summary(R_c, R_single, R_single, pump.power_mw, bandwidth)

    rho = source_state(PumpPreparation.singlet(), imp, crystal, temperature, 2 * pump.wavelength_nm)
    flux = sim["flux_pairs_per_s"] or R_c
    # each analyzed detector sees half of its arm's singles at the tomography flux
    singles = 0.5 * flux / eta_c + imp.dark_count_rate
    ss = np.random.SeedSequence(seed).spawn(2)
    data = simulate_counts(rho, flux, sim["integration_time_s"], ss[0], singles=(singles, singles),
                           window_ns=imp.coincidence_window, include_accidentals=sim["include_accidentals"],
                           polarizer_extinction=imp.polarizer_extinction)
    mc_seed = int(ss[1].generate_state(1)[0])
    raw = monte_carlo_errors(data, sim["mc_runs"], mc_seed)
    rho_mle = mle_reconstruct(data)

    report = {
        "seed": seed,
        "temperature_C": temperature,
        "geometry": {"w_p_um": geom.w_p, "w_si_um": geom.w_si, "xi_p": geom.xi_p, "xi_si": geom.xi_si},
        "R_c_per_s": rates.R_c,
        "R_s_per_s": rates.R_s,
        "R_i_per_s": rates.R_i,
        "eta_c": rates.eta_c,
        "eta_c0": eta0,
        "bandwidth_nm": bandwidth,
        "B_per_s_mW_nm": rates.B,
        "V_diag": visibility(rho, "diag"),
        "V_HV": visibility(rho, "HV"),
        "source_state": _metrics_dict(state_metrics(rho)),
        "tomography": {
            "flux_pairs_per_s": flux,
            "integration_time_s": sim["integration_time_s"],
            "total_counts": float(data.counts.sum()),
            "accidentals_per_setting": accidentals_per_setting(data) if sim["include_accidentals"] else 0.0,
            "raw": _metrics_dict(raw),
        },
    }
    if sim["include_accidentals"] and accidentals_per_setting(data) > 0:
        corrected = monte_carlo_errors(subtract_accidentals(data), sim["mc_runs"], mc_seed)
        report["tomography"]["accidentals_subtracted"] = _metrics_dict(corrected)
    # headline numbers
    report.update(F=raw.fidelity, T=raw.tangle, C=raw.concurrence, std_F=raw.std_fidelity, std_T=raw.std_tangle,
                  V=report["V_diag"])
    return report, rho, rho_mle, data


def _metrics_dict(m):
    out = {"F": m.fidelity, "C": m.concurrence, "T": m.tangle}
    if m.runs:
        out.update(std_F=m.std_fidelity, std_T=m.std_tangle, mc_runs=m.runs, failed_runs=list(m.failed_runs))
    return out


def cmd_simulate(ctx, args):
    seed = ctx.seed("simulate")
    report, rho, rho_mle, data = run_simulation(ctx.cfg, seed)
    write_matrix_csv(rho, ctx.out_dir / "rho_source.csv")
    write_matrix_csv(rho_mle, ctx.out_dir / "rho_mle.csv")
    write_dataset(data, ctx.out_dir / "tomography_counts.csv", ctx.out_dir / "tomography_counts.json")
    print(_write_report(ctx, "simulate", report))
    return 0


def _read_input(reader, path):
    try:
        return reader(path)
    except FileNotFoundError:
        raise UsageError(f"input file {path} not found") from None
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None


def cmd_fit(ctx, args):
    if args.subject == "rate_scaling":
        points = _read_input(read_rate_csv, args.input)
        if not points:
            raise UsageError(f"{args.input}: no data rows")
        try:
            a = fit_rate_scaling(points)
        except InsufficientDataError as exc:
            raise UsageError(str(exc)) from None
        res = rate_scaling_residuals(points, a)
        report = {"subject": "rate_scaling", "model": "R_c = a * sqrt(L_mm)", "a": a, "n_points": len(points),
                  "residual_norm": float(np.linalg.norm(res)), "residuals": res.tolist()}
    else:
        records = _read_input(read_sweep_csv, args.input)
        if not records:
            raise UsageError(f"{args.input}: no data rows")
        try:
            opt = sweep_optimum(records)
        except InsufficientDataError as exc:
            raise UsageError(str(exc)) from None
        report = {"subject": "sweep", "w_p_opt_um": opt.w_p_opt, "w_si_opt_um": opt.w_si_opt,
                  "R_c_max": opt.R_c_max, "on_boundary": opt.on_boundary, "residual_norm": opt.residual_norm,
                  "n_records": len(records),
                  "slices": [{"w_p_um": s[0], "w_si_opt_um": s[1], "R_c_max": s[2]} for s in opt.slices]}
    print(_write_report(ctx, f"fit_{args.subject}", report))
    return 0


def cmd_optimize_focus(ctx, args):
    crystal, pump = cfgmod.crystal(ctx.cfg), cfgmod.pump(ctx.cfg)
    objective = args.objective or ctx.cfg["source"]["focus_objective"]
    g = optimal_geometry(crystal, pump, objective, args.temperature)
    report = {"objective": objective, "length_mm": crystal.length_mm, "w_p_um": g.w_p, "w_si_um": g.w_si,
              "xi_p": g.xi_p, "xi_si": g.xi_si, "z_r_p_mm": g.z_r_p, "z_r_si_mm": g.z_r_si}
    print(_write_report(ctx, "optimize_focus", report))
    return 0


def cmd_tomography(ctx, args):
    sidecar = args.sidecar or str(Path(args.counts).with_suffix(".json"))
    data = _read_input(lambda p: read_dataset(p, sidecar), args.counts)
    target = TARGETS[args.target]
    if args.subtract_accidentals:
        data = subtract_accidentals(data)
    rho_lin = linear_reconstruct(data)
    rho = mle_reconstruct(data)
    report = {"target": args.target, "subtract_accidentals": bool(args.subtract_accidentals),
              "linear_min_eigenvalue": float(np.linalg.eigvalsh(rho_lin).min())}
    if args.mc_runs:
        seed = ctx.seed("tomography with Monte Carlo errors")
        m = monte_carlo_errors(data, args.mc_runs, seed, psi=target)
        report.update(seed=seed, **_metrics_dict(m))
    else:
        c, t = concurrence_tangle(rho)
        report.update(F=fidelity(rho, target), C=c, T=t)
    if data.floored is not None:
        report["floored_settings"] = [str(s) for s, f in zip(data.settings, data.floored) if f]
    write_matrix_csv(rho, ctx.out_dir / "rho_mle.csv")
    write_matrix_csv(rho_lin, ctx.out_dir / "rho_linear.csv")
    print(_write_report(ctx, "tomography", report))
    return 0


# ----------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="preset name (lab, ideal) or path to a JSON config")
    common.add_argument("--seed", type=int, help="master seed for stochastic commands")
    common.add_argument("--out-dir", help="output directory (default: output.directory of the config)")
    common.add_argument("--format", choices=("csv", "json"), help="output file format")

    p = _Parser(prog="ppktp-source", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("tuning-curve", parents=[common], help="phasematched wavelengths versus temperature")
    s.add_argument("--t-min", type=float, default=25.0)
    s.add_argument("--t-max", type=float, default=60.0)
    s.add_argument("--step", type=float, default=1.0)
    s.set_defaults(func=cmd_tuning_curve)

    s = sub.add_parser("spectrum", parents=[common], help="sinc² spectrum on a wavelength grid, prints the FWHM")
    s.add_argument("--temperature", type=float, help="°C (default: degeneracy temperature)")
    s.add_argument("--lambda-min", type=float, help="nm (default: 2λp − 2)")
    s.add_argument("--lambda-max", type=float, help="nm (default: 2λp + 2)")
    s.add_argument("--points", type=int, default=801)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("simulate", parents=[common], help="end-to-end source and tomography simulation")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", parents=[common], help="fit rate scaling or a waist sweep from CSV")
    s.add_argument("subject", choices=("rate_scaling", "sweep"))
    s.add_argument("input", help="CSV file")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("optimize-focus", parents=[common], help="empirically optimal pump and collection waists")
    s.add_argument("--objective", choices=("max_pairs", "max_coupling"))
    s.add_argument("--temperature", type=float, help="°C (default: crystal reference temperature)")
    s.set_defaults(func=cmd_optimize_focus)

    s = sub.add_parser("tomography", parents=[common], help="reconstruct ρ from a counts CSV and JSON sidecar")
    s.add_argument("counts", help="CSV with setting_A, setting_B, counts")
    s.add_argument("--sidecar", help="JSON acquisition parameters (default: counts path with .json suffix)")
    s.add_argument("--target", choices=sorted(TARGETS), default="psi-")
    s.add_argument("--mc-runs", type=int, default=0, help="Monte Carlo runs for error bars (needs a seed)")
    s.add_argument("--subtract-accidentals", action="store_true")
    s.set_defaults(func=cmd_tomography)
    return p


def _merge_globals(argv):
    # global flags may appear before or after the subcommand; argparse lets the
    # subparser default (None) shadow a value given before it, so parse twice.
    parser = build_parser()
    args = parser.parse_args(argv)
    pre, _ = argparse.ArgumentParser(add_help=False, parents=[_globals_only()]).parse_known_args(
        argv[:argv.index(args.command)] if args.command in argv else [])
    for k in ("config", "seed", "out_dir", "format"):
        if getattr(args, k) is None:
            setattr(args, k, getattr(pre, k))
    return args


def _globals_only():
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config")
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir")
    g.add_argument("--format")
    return g


def _error(kind, exc, code):
    print(json.dumps({"error": {"type": kind, "exception": type(exc).__name__, "message": str(exc)}}),
          file=sys.stderr)
    return code


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _merge_globals(argv)
        if args.format not in (None, "csv", "json"):
            raise UsageError("--format must be csv or json")
        ctx = _Context(args)
        return args.func(ctx, args)
    except UsageError as exc:
        return _error("usage", exc, 2)
    except COMPUTATION_ERRORS as exc:
        return _error("computation", exc, 1)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        return _error("computation", exc, 1)


if __name__ == "__main__":
    sys.exit(main())
