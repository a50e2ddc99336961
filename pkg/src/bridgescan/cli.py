"""Command line: ``bridgescan {simulate,identify,report,selftest}``.

Exit codes: 0 success, 2 configuration or precondition error, 3 numerical
failure, 4 acceptance failure (``report --check`` and ``selftest``).
"""
from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESET_NAMES, ConfigError, ExperimentConfig, preset
from .experiment import PreconditionError, RunOutput, identify, simulate_run, true_omegas, truth_table
from .modeshape import IdentifiedModes
from .sigproc import welch_psd
from .storage import (CONFIG, RunEntry, RunManifest, dump_json, read_record, read_series, timestamp, write_record,
                      write_series)
from .studies import truth_shapes
from .traffic import TrafficRealization

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
NUMERICAL_ERRORS = (ArithmeticError, np.linalg.LinAlgError)

# default ``report --check`` shape thresholds, keyed by estimator
SHAPE_CHECKS = {"NLS": ("mac", [0.90, 0.95, 0.95, 0.95]), "SD": ("r", [0.90] * 4), "EPS": ("r", [0.85] * 4)}


def _run_name(i: int) -> str:
    return f"run_{i:03d}"


# -- simulate ------------------------------------------------------------------

def _simulate_one(args) -> tuple[int, RunOutput | None, str | None]:
    cfg_dict, index = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        return index, simulate_run(cfg, index), None
    except NUMERICAL_ERRORS as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def _write_run(out: Path, run: RunOutput, n_modes: int) -> list[str]:
    name = _run_name(run.index)
    files = [f"{name}.csv", f"{name}.json"]
    write_record(out / files[0], run.record, n_modal=n_modes)
    if run.force is not None:
        files.append(f"{name}_force.csv")
        write_series(out / files[-1], "force", run.force)
    if run.traffic is not None:
        files.append(f"{name}_traffic.csv")
        run.traffic.to_csv(out / files[-1])
    return files


def run_simulate(cfg: ExperimentConfig, out, workers: int = 1) -> RunManifest:
    """Simulate every run of ``cfg`` into ``out`` and write the manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / CONFIG)
    manifest = RunManifest(cfg.digest(), __version__, timestamp())
    jobs = [(cfg.to_dict(), i) for i in range(cfg.runs)]
    if workers > 1 and cfg.runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_one, jobs))
    else:
        results = [_simulate_one(j) for j in jobs]
    for index, run, err in results:
        entry = RunEntry(index, [cfg.seed, index])
        if run is None:
            entry.status, entry.error = "failed", err
        else:
            entry.files = _write_run(out, run, cfg.beam.n_modes)
        manifest.runs.append(entry)
    manifest.finished = timestamp()
    manifest.save(out)
    return manifest


def load_runs(directory) -> tuple[ExperimentConfig, RunManifest, list[RunOutput]]:
    d = Path(directory)
    manifest = RunManifest.load(d)
    cfg = ExperimentConfig.load(d / CONFIG)
    runs = []
    for entry in manifest.runs:
        if entry.status != "ok":
            continue
        name = _run_name(entry.index)
        rec = read_record(d / f"{name}.csv")
        force = read_series(d / f"{name}_force.csv") if (d / f"{name}_force.csv").exists() else None
        traffic = (TrafficRealization.from_csv(d / f"{name}_traffic.csv")
                   if (d / f"{name}_traffic.csv").exists() else None)
        runs.append(RunOutput(entry.index, rec, force, traffic))
    return cfg, manifest, runs


# -- identify --------------------------------------------------------------------

def _write_modes_table(path, modes: IdentifiedModes, table: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "omega", "frequency_hz", "zeta", "excited", "omega_true", "mac", "r", "r_abs"])
        for k in range(modes.n_modes):
            w.writerow([k + 1, repr(float(modes.omegas[k])), repr(float(modes.omegas[k] / (2 * np.pi))),
                        repr(float(modes.zetas[k])), int(modes.excited[k]), repr(table["omega_true"][k]),
                        repr(table["mac"][k]), repr(table["r"][k]), repr(table["r_abs"][k])])


def run_identify(directory, estimator: str | None = None) -> Path:
    cfg, _, runs = load_runs(directory)
    est = estimator or cfg.resolved_estimator
    modes = identify(cfg, runs, est)
    table = truth_table(cfg, modes)
    out = Path(directory) / f"identify_{est}"
    out.mkdir(exist_ok=True)
    modes.to_csv(out / "shapes.csv")
    _write_modes_table(out / "modes.csv", modes, table)
    summary = modes.summary()
    summary.update(table)
    dump_json(out / "summary.json", summary)
    return out


# -- report ------------------------------------------------------------------------

def _load_identified(path: Path) -> tuple[IdentifiedModes, dict]:
    summary = json.loads((path / "summary.json").read_text())
    with open(path / "shapes.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    arr = np.array(rows, dtype=float)
    modes = IdentifiedModes(summary["omega"], summary["zeta"], arr[:, 0], arr[:, 1:].T,
                            summary["estimator"], summary["excited"])
    return modes, summary


def check_summary(summary: dict, cfg: ExperimentConfig) -> list[tuple[str, bool, str]]:
    """Pass/fail lines for one identified-modes summary."""
    est = summary["estimator"]
    key, default = SHAPE_CHECKS[est]
    tols = cfg.identify.check_shape or default
    tol_w = cfg.identify.check_frequency
    lines = []
    if tol_w is not None:
        # frequencies are judged on the EFDD stage, before any NLS refinement
        omegas = summary.get("efdd_omega", summary["omega"])
        for k, (w, w0) in enumerate(zip(omegas, summary["omega_true"])):
            err = w / w0 - 1
            lines.append((f"{est} mode {k + 1} EFDD frequency", abs(err) <= tol_w,
                          f"{err:+.4f} (tol {tol_w})"))
    for k, v in enumerate(summary[key]):
        tol = tols[k] if k < len(tols) else tols[-1]
        lines.append((f"{est} mode {k + 1} {key}", v >= tol, f"{v:.4f} (min {tol})"))
    for k in cfg.identify.check_unexcited or ():
        flag = not summary["excited"][int(k) - 1]
        lines.append((f"{est} mode {int(k)} unexcited", flag, f"flagged: {flag}"))
    return lines


def run_report(directory) -> tuple[Path, list[tuple[str, bool, str]]]:
    from .plotting import plot_psd, plot_shapes

    d = Path(directory)
    idents = sorted(p for p in d.glob("identify_*") if (p / "summary.json").exists())
    if not idents:
        raise FileNotFoundError(f"no identification outputs in {d}; run 'identify' first")
    cfg, manifest, runs = load_runs(d)
    out = d / "report"
    if out.exists():
        shutil.rmtree(out)
    out.mkdir()
    bundle = {"config_hash": manifest.config_hash, "name": cfg.name, "runs": len(runs), "estimators": {}}
    lines = []
    for p in idents:
        modes, summary = _load_identified(p)
        est = summary["estimator"]
        truth = truth_shapes(cfg.beam.length, modes.x, modes.n_modes)
        if est != "NLS":
            truth = np.abs(truth)
        for k in range(modes.n_modes):
            with open(out / f"shape_{est.lower()}_mode{k + 1}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["x", "phi", "reference"])
                for xi, s, t in zip(modes.x, modes.shapes[k], truth[k]):
                    w.writerow([repr(float(xi)), repr(float(s)), repr(float(t))])
        plot_shapes(modes, truth, out / f"shapes_{est.lower()}.png")
        bundle["estimators"][est] = summary
        lines += check_summary(summary, cfg)
    psds = [welch_psd(r.record.acc, r.record.dt) for r in runs]
    n = min(p.power.size for p in psds)
    omega, power = psds[0].omega[:n], np.mean([p.power[:n] for p in psds], axis=0)
    with open(out / "psd.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frequency_hz", "psd"])
        for f, pw in zip(omega / (2 * np.pi), power):
            w.writerow([repr(float(f)), repr(float(pw))])
    plot_psd(omega, power, out / "psd.png", markers=true_omegas(cfg))
    bundle["checks"] = [{"name": n_, "passed": ok, "detail": det} for n_, ok, det in lines]
    dump_json(out / "report.json", bundle)
    return out, lines


# -- entry point -------------------------------------------------------------------

def _load_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("--config", "give either --config or --preset, not both")
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise ConfigError("--config", "a config file or preset is required")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    return cfg.replace(**changes) if changes else cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bridgescan", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"bridgescan {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate sensor records for an experiment")
    s.add_argument("--config", type=Path, help="experiment config JSON")
    s.add_argument("--preset", choices=PRESET_NAMES, help="built-in reference experiment")
    s.add_argument("--seed", type=int, help="override the master seed")
    s.add_argument("--runs", type=int, help="override the number of runs")
    s.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    s.add_argument("--out", type=Path, required=True, help="run directory")

    i = sub.add_parser("identify", help="identify modes from a run directory")
    i.add_argument("--out", type=Path, required=True, help="run directory")
    i.add_argument("--estimator", choices=("nls", "sd", "eps"))

    r = sub.add_parser("report", help="bundle tables, curves and figures")
    r.add_argument("--out", type=Path, required=True, help="run directory")
    r.add_argument("--check", action="store_true", help="exit 4 when an acceptance check fails")

    t = sub.add_parser("selftest", help="run the property suites on synthetic oracles")
    t.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("config", help="print a preset config as JSON")
    c.add_argument("name", choices=PRESET_NAMES)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = _load_config(args)
            if args.workers < 1:
                raise ConfigError("--workers", "must be >= 1")
            m = run_simulate(cfg, args.out, args.workers)
            ok = len(m.runs) - len(m.failed)
            print(f"simulated {ok}/{len(m.runs)} runs into {args.out} (config {m.config_hash[:12]})")
            if m.failed:
                print(f"failed runs: {m.failed}", file=sys.stderr)
                return EXIT_NUMERIC
        elif args.command == "identify":
            out = run_identify(args.out, args.estimator)
            with open(out / "modes.csv") as fh:
                sys.stdout.write(fh.read())
        elif args.command == "report":
            out, lines = run_report(args.out)
            for name, ok, detail in lines:
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            print(f"report written to {out}")
            if args.check and not all(ok for _, ok, _ in lines):
                return EXIT_CHECK
        elif args.command == "selftest":
            from .selftest import run_all
            results = run_all(seed=args.seed)
            for name, ok, detail in results:
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            if not all(ok for _, ok, _ in results):
                return EXIT_CHECK
        elif args.command == "config":
            print(preset(args.name).to_json())
    except (ConfigError, PreconditionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK
