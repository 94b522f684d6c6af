"""Command-line entry point.

Usage:
    planck2d simulate CONFIG -o DATASET [--seed N]
    planck2d simulate-flux CONFIG --outdir DIR [--seed N]
    planck2d fit2d DATASET [-o REPORT] [--plot-data DIR]
    planck2d fit1d DATASET --eta-db L [--t-mc T] [--curve T] [-o REPORT]
    planck2d spacing DATASET [-o REPORT] [--plot-data CSV]
    planck2d flux MANIFEST [--vna TRACE] [-o REPORT] [--plot-data CSV]
    planck2d impact --s-db S --mu MU --kappa-true K --kappa-assumed K

Exit codes: 0 success, 1 runtime failure, 2 input/config error, 3 fit did not converge.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .calibrate import (
    CONVENTION_1D,
    FitOptions,
    IdentifiabilityError,
    InsufficientDataError,
    compare_sweeps,
    detect_eta_drift,
    fit_1d,
    fit_2d,
    flux_loss_sweep,
    spacing_analysis,
)
from .physics import CalibrationParams, PhysicsDomainError, detected_power, loss_db_to_eta
from .simulate import (
    InfeasiblePlanError,
    NoiseConfig,
    plan_sweep,
    simulate_dataset,
    simulate_flux_datasets,
    simulate_vna_trace,
)
from .tomography import (
    ANCHOR_NOTE,
    CalibrationPair,
    UnphysicalStateError,
    miscalibrate,
    state_from_squeezing,
)

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT, EXIT_NOCONVERGE = 0, 1, 2, 3
OUTPUT_DIR_ENV = "PLANCK2D_OUTPUT_DIR"


class InputError(Exception):
    pass


def _default_output(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / name


def _temperature_arg(text: str) -> float:
    try:
        return io.parse_temperature(text)
    except io.ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_dataset(path):
    try:
        return io.read_dataset(path)
    except FileNotFoundError:
        raise InputError(f"dataset not found: {path}") from None
    except (io.FormatError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _fit_options(args) -> FitOptions:
    return FitOptions(max_iterations=args.max_iterations, weight_rule=args.weight_rule)


def _emit(report: dict, out: Path, quiet: bool = False):
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_report(report, out)
    if not quiet:
        print(f"report written to {out}")


# -- commands ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = io.load_yaml(args.config)
    truth, receiver, plan_kwargs, thermal, noise, eta_of_tmc = io.simulation_from_config(cfg)
    if args.seed is not None:
        noise = NoiseConfig(noise.mode, noise.t_int, args.seed, noise.temperature_jitter_sigma)
    plan = plan_sweep(model=thermal, **plan_kwargs)
    if plan.errors:
        raise InputError("infeasible sweep plan: " + "; ".join(msg for _, msg in plan.errors))
    ds = simulate_dataset(truth, plan, receiver, noise, eta_of_tmc)
    io.write_dataset(ds, args.output, temperature_unit=args.temperature_unit)
    print(f"wrote {args.output}: {len(ds.curves)} curves, {ds.n_points} points")
    print(f"truth: kappa={truth.kappa:g} n_H={truth.n_H:g} loss={truth.loss_db:.4g} dB (synthetic)")
    return EXIT_OK


def cmd_simulate_flux(args) -> int:
    cfg = io.load_yaml(args.config)
    truth, receiver, plan_kwargs, thermal, noise, _ = io.simulation_from_config(cfg)
    if "snail" not in cfg or "I_dc" not in cfg:
        raise InputError("flux config needs 'snail' model and 'I_dc' grid")
    snail = io.snail_from_config(cfg["snail"])
    I_grid = [float(i) for i in cfg["I_dc"]]
    if 0.0 not in I_grid:
        raise InputError("I_dc grid must include the zero-bias reference")
    if args.seed is not None:
        noise = NoiseConfig(noise.mode, noise.t_int, args.seed, noise.temperature_jitter_sigma)
    plan = plan_sweep(model=thermal, **plan_kwargs)
    if plan.errors:
        raise InputError("infeasible sweep plan: " + "; ".join(msg for _, msg in plan.errors))
    sets = simulate_flux_datasets(truth, snail, I_grid, plan, receiver, noise)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for I, ds in sets.items():
        name = f"flux_{I:+08.2f}uA.csv"
        io.write_dataset(ds, outdir / name)
        paths[I] = name
    vna_sigma = float(cfg.get("vna_noise_sigma", 0.0))
    vna = simulate_vna_trace(snail, I_grid, vna_sigma, seed=noise.rng_seed)
    io.write_vna_trace(vna, outdir / "vna_trace.csv")
    io.write_manifest(outdir / "manifest.yaml", paths, "vna_trace.csv")
    print(f"wrote {len(paths)} datasets, VNA trace and manifest to {outdir}")
    return EXIT_OK


def _plot_data_2d(ds, params, outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    for c in ds.curves:
        fit = detected_power(params, c.T_att, np.full(len(c), c.T_mc), ds.receiver)
        with open(outdir / f"curve_Tmc_{c.T_mc * 1e3:.1f}mK.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["T_att_K", "P_measured", "P_fit"])
            for t, p, f in zip(c.T_att, c.P, fit):
                w.writerow([io._g(t), io._g(p), io._g(f)])


def cmd_fit2d(args) -> int:
    ds = _load_dataset(args.dataset)
    if len(ds.curves) < 2:
        raise InputError("dataset has a single curve: a 2D fit needs >= 2 mixing-chamber "
                         "temperatures; use 'planck2d fit1d'")
    try:
        res = fit_2d(ds, _fit_options(args))
    except IdentifiabilityError as exc:
        raise InputError(str(exc)) from None
    result = {"fit": res.to_dict(), "receiver": ds.receiver.to_dict(),
              "kappa_reference": "kappa is power at the digitizer per photon at the reconstruction "
                                 "point, times Z0, in the dataset's power unit times ohms"}
    report = io.build_report("fit2d", result, [args.dataset])
    _emit(report, args.output or _default_output("fit2d_report.json"))
    if args.plot_data:
        _plot_data_2d(ds, res.params, Path(args.plot_data))
    p = res.params
    print(f"kappa = {p.kappa:.6g} +/- {res.sigma[0]:.2g}, n_H = {p.n_H:.6g} +/- {res.sigma[1]:.2g}, "
          f"loss = {res.loss_dB:.4f} +/- {res.loss_dB_sigma:.2g} dB")
    if not res.converged:
        print(f"fit did not converge after {res.iterations} iterations", file=sys.stderr)
        return EXIT_NOCONVERGE
    return EXIT_OK


def cmd_fit1d(args) -> int:
    ds = _load_dataset(args.dataset)
    if args.curve is not None:
        matches = [c for c in ds.curves if abs(c.T_mc - args.curve) <= 1e-9]
        if not matches:
            raise InputError(f"no curve at T_mc = {args.curve} K")
        curve = matches[0]
    else:
        curve = ds.curves[0]
    if args.t_mc is None:
        print(f"notice: --t-mc not given; using the curve's recorded T_mc = {curve.T_mc * 1e3:g} mK")
    try:
        eta = loss_db_to_eta(args.eta_db)
        res = fit_1d(curve, eta, args.t_mc, _fit_options(args), ds.receiver)
    except (PhysicsDomainError, IdentifiabilityError, InsufficientDataError) as exc:
        raise InputError(str(exc)) from None
    result = {"fit": res.to_dict(), "curve_T_mc": curve.T_mc, "receiver": ds.receiver.to_dict(),
              "convention": CONVENTION_1D}
    report = io.build_report("fit1d", result, [args.dataset])
    _emit(report, args.output or _default_output("fit1d_report.json"))
    print(f"kappa = {res.params.kappa:.6g}, n_H = {res.params.n_H:.6g} "
          f"(pinned loss {args.eta_db:g} dB, T_mc {res.pinned['T_mc'] * 1e3:g} mK)")
    print(CONVENTION_1D)
    if not res.converged:
        return EXIT_NOCONVERGE
    return EXIT_OK


def cmd_spacing(args) -> int:
    ds = _load_dataset(args.dataset)
    try:
        sr = spacing_analysis(ds, args.threshold)
    except InsufficientDataError as exc:
        raise InputError(str(exc)) from None
    try:
        verdict = detect_eta_drift(sr, alpha=args.alpha).to_dict()
    except InsufficientDataError as exc:
        verdict = {"verdict": "insufficient data", "detail": str(exc)}
    result = {"spacing": sr.to_dict(), "drift": verdict, "linear_region_threshold": args.threshold}
    report = io.build_report("spacing", result, [args.dataset])
    _emit(report, args.output or _default_output("spacing_report.json"))
    if args.plot_data:
        with open(args.plot_data, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "T_mc_1_K", "T_mc_2_K", "delta_P", "sigma", "coupling", "coupling_sigma"])
            for e in sr.entries:
                w.writerow([e.index, io._g(e.T_mc_pair[0]), io._g(e.T_mc_pair[1]), io._g(e.delta_P),
                            io._g(e.sigma), io._g(e.coupling), io._g(e.coupling_sigma)])
    for e in sr.entries:
        if e.ok:
            print(f"dP_{e.index} ({e.T_mc_pair[0] * 1e3:g}->{e.T_mc_pair[1] * 1e3:g} mK) = "
                  f"{e.delta_P:.6g} +/- {e.sigma:.2g}")
        else:
            print(f"dP_{e.index}: {e.error}")
    print(f"drift verdict: {verdict['verdict']}")
    return EXIT_OK


def cmd_flux(args) -> int:
    try:
        paths, vna_path = io.read_manifest(args.manifest)
    except io.ConfigError as exc:
        raise InputError(str(exc)) from None
    if 0.0 not in paths:
        raise InputError("manifest has no zero-bias (I_dc = 0) reference dataset")
    if args.vna:
        vna_path = Path(args.vna)
    opts = _fit_options(args)
    datasets = {I: _load_dataset(p) for I, p in paths.items()}
    fits = {I: fit_2d(ds, opts) for I, ds in datasets.items()}
    records = flux_loss_sweep(datasets, opts, fits=fits)
    result = {
        "fits": {f"{I:g}": fits[I].to_dict() for I in sorted(fits)},
        "delta_L": [r.to_dict() for r in records],
    }
    inputs = [args.manifest] + [paths[I] for I in sorted(paths)]
    comparison = None
    if vna_path:
        try:
            vna = io.read_vna_trace(vna_path)
        except (io.FormatError, OSError) as exc:
            raise InputError(str(exc)) from None
        comparison = compare_sweeps(records, vna)
        result["comparison"] = comparison.to_dict()
        inputs.append(vna_path)
    report = io.build_report("flux", result, inputs)
    _emit(report, args.output or _default_output("flux_report.json"))
    if args.plot_data:
        with open(args.plot_data, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["I_dc_uA", "delta_L_planck2d_dB", "sigma_dB", "delta_L_vna_dB"])
            vna_L = dict(zip(comparison.I_dc, comparison.b)) if comparison else {}
            for r in records:
                w.writerow([io._g(r.I_dc), io._g(r.delta_L), io._g(r.sigma),
                            io._g(vna_L[r.I_dc]) if r.I_dc in vna_L else ""])
    for r in records:
        print(f"I = {r.I_dc:+8.2f} uA: dL = {r.delta_L:+.4f} +/- {r.sigma:.4f} dB")
    if comparison:
        print(f"vs VNA: rms diff {comparison.rms:.4f} dB, rms sigma {comparison.sigma_rms:.4f} dB, "
              f"flagged {comparison.dispersion_candidates}")
    return EXIT_NOCONVERGE if not all(f.converged for f in fits.values()) else EXIT_OK


def cmd_impact(args) -> int:
    try:
        state = state_from_squeezing(args.s_db, args.mu)
    except (UnphysicalStateError, ValueError) as exc:
        raise InputError(f"unphysical input state: {exc}") from None
    if args.kappa_true <= 0 or args.kappa_assumed <= 0:
        raise InputError("kappa values must be positive")
    # only the kappa ratio enters the vacuum-anchored map
    pair = CalibrationPair(CalibrationParams(args.kappa_true, 0.0, 1.0),
                           CalibrationParams(args.kappa_assumed, 0.0, 1.0))
    out = miscalibrate(state, pair)
    result = {"input_state": state.to_dict(), "reconstructed_state": out.to_dict(),
              "kappa_true": args.kappa_true, "kappa_assumed": args.kappa_assumed,
              "ratio": pair.ratio, "assumption": ANCHOR_NOTE}
    report = io.build_report("impact", result)
    if args.output:
        _emit(report, args.output)
    print(f"S' = {out.S:.4f} dB, A' = {out.A:.4f} dB, mu' = {out.mu:.4f}"
          + ("" if out.physical else " (unphysical)"))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planck2d", description="Two-dimensional Planck spectroscopy toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def fit_flags(p):
        p.add_argument("--max-iterations", type=int, default=200)
        p.add_argument("--weight-rule", choices=("per_curve", "inverse_variance", "uniform"), default="per_curve")

    p = sub.add_parser("simulate", help="generate a synthetic sweep dataset")
    p.add_argument("config", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--temperature-unit", choices=("K", "mK"), default="K")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("simulate-flux", help="generate per-bias datasets, a VNA trace and a manifest")
    p.add_argument("config", type=Path)
    p.add_argument("--outdir", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate_flux)

    p = sub.add_parser("fit2d", help="fit kappa, n_H and eta to all curves")
    p.add_argument("dataset", type=Path)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--plot-data", type=Path, help="directory for per-curve CSV plot data")
    fit_flags(p)
    p.set_defaults(func=cmd_fit2d)

    p = sub.add_parser("fit1d", help="conventional fit with pinned loss and bath temperature")
    p.add_argument("dataset", type=Path)
    p.add_argument("--eta-db", type=float, required=True, help="pinned loss in dB")
    p.add_argument("--t-mc", type=_temperature_arg, help="pinned bath temperature (e.g. 100mK)")
    p.add_argument("--curve", type=_temperature_arg, help="which curve to fit (default: lowest T_mc)")
    p.add_argument("-o", "--output", type=Path)
    fit_flags(p)
    p.set_defaults(func=cmd_fit1d)

    p = sub.add_parser("spacing", help="adjacent-curve spacing table and drift verdict")
    p.add_argument("dataset", type=Path)
    p.add_argument("--threshold", type=float, default=2.0, help="linear region, multiples of T_cr")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--plot-data", type=Path)
    p.set_defaults(func=cmd_spacing)

    p = sub.add_parser("flux", help="loss change versus bias from per-bias 2D fits")
    p.add_argument("manifest", type=Path)
    p.add_argument("--vna", type=Path, help="VNA trace CSV (overrides the manifest entry)")
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--plot-data", type=Path)
    fit_flags(p)
    p.set_defaults(func=cmd_flux)

    p = sub.add_parser("impact", help="reconstructed squeezing and purity under a kappa error")
    p.add_argument("--s-db", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--kappa-true", type=float, required=True)
    p.add_argument("--kappa-assumed", type=float, required=True)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_impact)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, io.ConfigError, io.FormatError, InfeasiblePlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PhysicsDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT if args.command in ("simulate", "simulate-flux") else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
