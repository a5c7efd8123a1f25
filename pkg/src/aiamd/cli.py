"""Command-line interface: select, run, scan-rho, analyze, check-dt.

Exit codes: 0 success, 2 configuration error, 3 instability/abort,
4 runtime numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .adaptive import (AiaResult, energy_error_bound, energy_error_bound_verlet,
                       max_stable_dt, select_b, stability_limit, verlet_timestep_check)
from .analysis import TimeSeries, acf, histogram, iacf, radius_of_gyration, rmsd, rmst
from .config import RunConfig, format_config, load_config
from .errors import (ConfigError, ConstraintConvergenceError, NoBondsError,
                     NumericalDivergenceError, UnstableStepSizeError)
from .integrators import ConstraintSolve, IntegratorSpec
from .samplers import HmcConfig, RunReport, TemperatureRescale, resample_momenta, run_hmc, run_md
from .system import PhaseState, System

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_NUMERICAL = 4


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "yes" if value else "no"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


# ---------------------------------------------------------------------------
# select

def cmd_select(args) -> int:
    cfg = load_config(args.config)
    if args.print_config:
        print(format_config(cfg), end="")
        return EXIT_OK
    system = cfg.system.build()
    result = select_b(system, cfg.dt, cfg.safety_factor)
    dt_max = max_stable_dt(result.t_min, cfg.safety_factor)
    print(f"fastest bond period   T_min = {result.t_min:.6g}")
    print(f"dimensionless step    h_bar = {result.h_bar:.6g}")
    print(f"selected parameter    b     = {result.b_opt:.6g}")
    print(f"objective (max rho)         = {result.objective:.6g}")
    print(f"admissible step range       : 0 < dt < {dt_max:.6g}")
    print(json.dumps({
        "t_min": result.t_min,
        "h_bar": result.h_bar,
        "b_opt": result.b_opt,
        "objective": result.objective,
        "safety_factor": result.safety_factor,
        "dt_max": dt_max,
    }))
    return EXIT_OK


# ---------------------------------------------------------------------------
# run

def _resolve_integrator(cfg: RunConfig, system: System) -> tuple[IntegratorSpec, AiaResult | None]:
    if cfg.integrator == "two-s-AIA":
        result = select_b(system, cfg.dt, cfg.safety_factor)
        return IntegratorSpec.two_stage(result.b_opt, preset="two-s-AIA"), result
    return cfg.integrator_spec(), None


def _initial_state(cfg: RunConfig, system: System) -> PhaseState:
    q = cfg.system.initial_positions()
    if cfg.method == "No" and cfg.canonical_temperature is not None:
        rng = np.random.default_rng(cfg.seed)
        p = resample_momenta(system, q, cfg.canonical_temperature, rng,
                             cfg.boltzmann_constant)
    else:
        p = np.zeros_like(q)
    return PhaseState(q, p)


def _header_record(cfg: RunConfig, system: System, spec: IntegratorSpec,
                   aia: AiaResult | None, seed: int) -> dict:
    return {
        "header": True,
        "dimension": system.dimension,
        "n_particles": system.n_particles,
        "method": cfg.method,
        "integrator": cfg.integrator,
        "b": spec.b,
        "h_bar": aia.h_bar if aia is not None else None,
        "dt": cfg.dt,
        "seed": seed,
    }


def _write_trajectory(path: Path, header: dict, frames, truncated: str | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for fr in frames:
            fh.write(json.dumps({
                "step": int(fr.step),
                "time": float(fr.time),
                "q": [float(v) for v in fr.q],
                "p": [float(v) for v in fr.p],
                "potential": float(fr.potential),
                "kinetic": float(fr.kinetic),
            }) + "\n")
        if truncated is not None:
            fh.write(json.dumps({"truncated": True, "reason": truncated}) + "\n")


def _write_observables(path: Path, cfg: RunConfig, spec: IntegratorSpec,
                       aia: AiaResult | None, seed: int,
                       report: RunReport | None, truncated: str | None = None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# aiamd observables\n")
        fh.write(f"# method = {cfg.method}\n")
        fh.write(f"# integrator = {cfg.integrator}\n")
        fh.write(f"# b = {_fmt(spec.b) if spec.b is not None else 'none'}\n")
        if aia is not None:
            fh.write(f"# h_bar = {_fmt(aia.h_bar)}\n")
        fh.write(f"# seed = {seed}\n")
        names = (["step", "time", "H", "K", "V", "T_inst", "delta_H", "accepted"]
                 if cfg.method == "HMC"
                 else ["step", "time", "H", "K", "V", "T_inst", "delta_H"])
        writer = csv.writer(fh)
        writer.writerow(names)
        if report is not None:
            columns = [report.observable_series[name] for name in names]
            for row in zip(*columns):
                writer.writerow([_fmt(int(v)) if name in ("step", "accepted") else _fmt(float(v))
                                 for name, v in zip(names, row)])
        if truncated is not None:
            fh.write(f"# truncated: {truncated}\n")


def _run_single(cfg: RunConfig, system: System, spec: IntegratorSpec,
                aia: AiaResult | None, seed: int, traj_path: Path, obs_path: Path) -> RunReport:
    initial = _initial_state(cfg, system)
    solve = ConstraintSolve(cfg.constraint_tolerance, cfg.constraint_max_iterations)
    header = _header_record(cfg, system, spec, aia, seed)
    try:
        if cfg.method == "HMC":
            hmc = HmcConfig(
                temperature=cfg.canonical_temperature,
                n_md_steps=cfg.nr_md_steps,
                dt=cfg.dt,
                integrator=spec,
                n_proposals=cfg.n_proposals,
                seed=seed,
                momentum_flip=cfg.momentum_flip,
                k_boltzmann=cfg.boltzmann_constant,
                solve=solve,
                frame_stride=cfg.output_stride,
            )
            report = run_hmc(system, initial, hmc)
        else:
            rescale = None
            if cfg.rescale_interval:
                rescale = TemperatureRescale(cfg.canonical_temperature, cfg.rescale_interval)
            report = run_md(system, initial, spec, cfg.dt, cfg.n_steps, rescale=rescale,
                            solve=solve, k_boltzmann=cfg.boltzmann_constant,
                            frame_stride=cfg.output_stride)
    except Exception as exc:
        _write_trajectory(traj_path, header, [], truncated=str(exc))
        _write_observables(obs_path, cfg, spec, aia, seed, None, truncated=str(exc))
        raise
    _write_trajectory(traj_path, header, report.frames)
    _write_observables(obs_path, cfg, spec, aia, seed, report)
    return report


def _suffixed(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix + path.suffix)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.print_config:
        print(format_config(cfg), end="")
        return EXIT_OK
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    system = cfg.system.build()
    spec, aia = _resolve_integrator(cfg, system)
    traj_path = out_dir / cfg.trajectory_output
    obs_path = out_dir / cfg.observables_output

    if aia is not None:
        print(f"adaptive selection: b = {aia.b_opt:.6g} (h_bar = {aia.h_bar:.6g})")

    if args.replicas == 1:
        reports = [(cfg.seed, _run_single(cfg, system, spec, aia, cfg.seed,
                                          traj_path, obs_path))]
    else:
        seeds = [int(s) for s in np.random.SeedSequence(cfg.seed).generate_state(
            args.replicas, np.uint64)]
        jobs = []
        with concurrent.futures.ThreadPoolExecutor(max_workers=min(args.replicas, 8)) as pool:
            for i, seed in enumerate(seeds):
                jobs.append(pool.submit(
                    _run_single, cfg, system, spec, aia, seed,
                    _suffixed(traj_path, f"_r{i}"), _suffixed(obs_path, f"_r{i}")))
            reports = [(seed, job.result()) for seed, job in zip(seeds, jobs)]

    for seed, report in reports:
        abs_dh = np.abs(report.delta_h_series)
        line = f"seed {seed}: "
        if report.acceptance_rate is not None:
            line += f"acceptance rate = {report.acceptance_rate:.4f}, "
        line += (f"mean |dH| = {abs_dh.mean():.6g}, max |dH| = {abs_dh.max():.6g}, "
                 f"force evaluations = {report.force_eval_count}")
        print(line)
    print(f"trajectory -> {traj_path}" + ("" if args.replicas == 1 else " (suffixed _rN)"))
    print(f"observables -> {obs_path}" + ("" if args.replicas == 1 else " (suffixed _rN)"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# scan-rho

def cmd_scan_rho(args) -> int:
    if args.b_count < 1 or args.h_count < 1:
        raise ConfigError("scan-rho grids must contain at least one point each")
    if args.h_min <= 0:
        raise ConfigError("h values must be positive")
    if not (0.0 < args.b_min < 0.5 and 0.0 < args.b_max < 0.5):
        raise ConfigError("b values must lie in (0, 0.5)")
    if args.b_max < args.b_min or args.h_max < args.h_min:
        raise ConfigError("grid upper bounds must not be below lower bounds")
    bs = np.linspace(args.b_min, args.b_max, args.b_count)
    hs = np.linspace(args.h_min, args.h_max, args.h_count)
    out_path = Path(args.output)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("h,b,rho\n")
        for b in bs:
            limit = stability_limit(float(b))
            for h in hs:
                if h >= limit:
                    cell = "inf"
                elif abs(b - 0.25) < 1e-9:
                    cell = f"{energy_error_bound_verlet(float(h)):.6g}"
                else:
                    cell = f"{energy_error_bound(float(h), float(b)):.6g}"
                fh.write(f"{h:.10g},{b:.10g},{cell}\n")
    print(f"rho grid ({len(hs)}x{len(bs)} cells) -> {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze

def _read_observables(path: Path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(rows)
    columns: dict[str, list[float]] = {}
    for record in reader:
        for key, value in record.items():
            columns.setdefault(key, []).append(float(value))
    return {key: np.asarray(vals) for key, vals in columns.items()}


def _read_trajectory(path: Path):
    header = None
    frames = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            record = json.loads(line)
            if record.get("header"):
                header = record
            elif record.get("truncated"):
                continue
            else:
                frames.append(record)
    if header is None:
        raise ConfigError(f"{path}: missing trajectory header record")
    return header, frames


def cmd_analyze(args) -> int:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wrote_anything = False

    if args.observables is not None:
        columns = _read_observables(Path(args.observables))
        if args.column not in columns:
            raise ConfigError(f"column {args.column!r} not in {sorted(columns)}")
        values = columns[args.column]
        spacing = 1.0
        if "time" in columns and len(columns["time"]) >= 2:
            spacing = float(columns["time"][1] - columns["time"][0])
        series = TimeSeries(values, spacing)
        max_lag = args.max_lag if args.max_lag is not None else min(len(values) // 4, 500)
        correlations = acf(series, max_lag)
        with open(out_dir / "acf.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "acf"])
            for lag, value in enumerate(correlations):
                writer.writerow([lag, _fmt(float(value))])
        est = iacf(series)
        with open(out_dir / "iacf.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iacf", "cutoff_lag", "truncated"])
            writer.writerow([_fmt(est.value), est.cutoff_lag, _fmt(est.truncated)])
        width = args.bin_width
        if width is None:
            span = float(values.max() - values.min())
            width = span / 50.0 if span > 0 else 1.0
        hist = histogram(series, width)
        with open(out_dir / "histogram.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_left", "bin_right", "frequency"])
            for left, right, freq in zip(hist.bin_edges[:-1], hist.bin_edges[1:],
                                         hist.frequencies):
                writer.writerow([_fmt(float(left)), _fmt(float(right)), _fmt(float(freq))])
        print(f"acf/iacf/histogram of {args.column!r} -> {out_dir} "
              f"(iacf = {est.value:.6g}, cutoff lag {est.cutoff_lag})")
        wrote_anything = True

    if args.trajectory is not None:
        header, frames = _read_trajectory(Path(args.trajectory))
        if len(frames) < 1:
            raise ConfigError(f"{args.trajectory}: no frames to analyze")
        dim = int(header["dimension"])
        n = int(header["n_particles"])
        ghost = System(masses=np.ones(n), dimension=dim)  # unit masses for gyration
        reference = np.asarray(frames[0]["q"])
        with open(out_dir / "rmsd_vs_time.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "time", "rmsd_to_first", "radius_of_gyration"])
            for fr in frames:
                q = np.asarray(fr["q"])
                writer.writerow([fr["step"], _fmt(float(fr["time"])),
                                 _fmt(rmsd(reference, q, dim)),
                                 _fmt(radius_of_gyration(ghost, q))])
        if len(frames) >= 2:
            worst = rmst([np.asarray(fr["q"]) for fr in frames], dim)
            print(f"rmsd table -> {out_dir / 'rmsd_vs_time.csv'} (rmst = {worst:.6g})")
        else:
            print(f"rmsd table -> {out_dir / 'rmsd_vs_time.csv'}")
        wrote_anything = True

    if not wrote_anything:
        raise ConfigError("analyze needs --observables and/or --trajectory")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check-dt

def cmd_check_dt(args) -> int:
    cfg = load_config(args.config)
    if args.print_config:
        print(format_config(cfg), end="")
        return EXIT_OK
    system = cfg.system.build()
    checks = verlet_timestep_check(system, cfg.dt)
    counts = {"ok": 0, "warning": 0, "error": 0}
    for check in checks:
        counts[check.status] += 1
        print(f"bond ({check.pair[0]},{check.pair[1]}): period T = {check.period:.6g}, "
              f"dt = {cfg.dt:.6g} -> {check.status}")
    print(f"{counts['ok']} ok, {counts['warning']} warning, {counts['error']} error")
    if counts["error"]:
        print("step size too large for at least one bond (T <= 5 dt)", file=sys.stderr)
        return EXIT_UNSTABLE
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aiamd",
        description="Two-stage splitting integrators with adaptive parameter selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_command(name, func, help_text):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="run configuration file")
        cmd.add_argument("--print-config", action="store_true",
                         help="echo the parsed configuration and exit")
        cmd.set_defaults(func=func)
        return cmd

    add_config_command("select", cmd_select,
                       "pick the optimal two-stage parameter for a system and dt")

    run_cmd = add_config_command("run", cmd_run, "run an MD or HMC simulation")
    run_cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_cmd.add_argument("--output-dir", default=".", help="directory for output files")
    run_cmd.add_argument("--replicas", type=int, default=1,
                         help="number of independently seeded chains")

    scan = sub.add_parser("scan-rho", help="tabulate the energy-error bound on a (h, b) grid")
    scan.add_argument("--b-min", type=float, required=True)
    scan.add_argument("--b-max", type=float, required=True)
    scan.add_argument("--b-count", type=int, required=True)
    scan.add_argument("--h-min", type=float, required=True)
    scan.add_argument("--h-max", type=float, required=True)
    scan.add_argument("--h-count", type=int, required=True)
    scan.add_argument("--output", default="rho_scan.csv")
    scan.set_defaults(func=cmd_scan_rho)

    analyze = sub.add_parser("analyze", help="summarize observables and trajectories")
    analyze.add_argument("--observables", default=None, help="observables CSV from a run")
    analyze.add_argument("--column", default="H", help="observable column to correlate")
    analyze.add_argument("--max-lag", type=int, default=None)
    analyze.add_argument("--bin-width", type=float, default=None)
    analyze.add_argument("--trajectory", default=None, help="trajectory JSONL from a run")
    analyze.add_argument("--output-dir", default=".")
    analyze.set_defaults(func=cmd_analyze)

    add_config_command("check-dt", cmd_check_dt,
                       "check every bond period against the Verlet step-size rules")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnstableStepSizeError, NoBondsError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (NumericalDivergenceError, ConstraintConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
