"""Command-line interface: ``adlreq <command> [options]``.

Exit codes: 0 on success, 2 on validation errors (bad config, unparseable
input, out-of-domain request), 1 on any other failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io, pipeline
from .config import PipelineConfig
from .errors import AdlReqError, ConfigError, DomainError, ParseError
from .regression import CoefficientTable, predict_peak_torque
from .synthetic import random_trial
from .trajectory import trajectory_text
from .wrist import KINDS, WristSampleSet

log = logging.getLogger("adlreq")

VALIDATION_ERRORS = (ConfigError, ParseError, DomainError)


def _json(path, payload) -> None:
    io.atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out(args, config) -> Path:
    return Path(args.out or config["output_dir"])


def _with_timing(args, manifest: dict, started: float) -> dict:
    if args.timing:
        manifest["timing_s"] = round(time.perf_counter() - started, 3)
    return manifest


# --------------------------------------------------------------------------
# Commands

def cmd_synthesize(args, config) -> int:
    seed = config["seed"] if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    out = _out(args, config)
    for s in range(args.subjects):
        for r in range(args.trials):
            subject = f"S{s + 1:02d}"
            traj = random_trial(rng, args.task, subject, r + 1, args.dt, args.moves,
                                peak_speed=args.peak_speed)
            io.atomic_write(out / f"{args.task}_{subject}_{r + 1}.csv", trajectory_text(traj))
    print(f"wrote {args.subjects * args.trials} trial(s) to {out}")
    return 0


def cmd_simulate(args, config) -> int:
    started = time.perf_counter()
    result = pipeline.simulate(config, args.trajectories)
    out = _out(args, config)
    io.write_records(out / "records.csv", result.records)
    io.write_design(out / "design.csv", result.design)
    _json(out / "manifest.json", _with_timing(args, result.manifest.to_dict(), started))
    stages = result.manifest.stages
    print(f"{stages['records']} torque record(s); "
          f"{len(result.manifest.exclusions)} exclusion(s); output in {out}")
    return 0


def _store_file(store: Path, name: str) -> Path:
    path = store / name
    if not path.is_file():
        raise ParseError(f"{path}: missing from record store")
    return path


def cmd_fit(args, config) -> int:
    store = Path(args.store)
    records = io.read_records(_store_file(store, "records.csv"))
    design = io.read_design(_store_file(store, "design.csv"))
    table = pipeline.fit(records, design)
    out = _out(args, config)
    table.to_csv(out / "coefficients.csv")
    table.to_json(out / "coefficients.json")
    io.write_csv(out / "skipped.csv", ("task_or_combo", "model_or_joint", "reason"),
                 [_skip_row(s) for s in table.skipped])
    print(f"{len(table)} regressor(s), {len(table.skipped)} skipped; output in {out}")
    return 0


def _skip_row(entry):
    if len(entry) == 3:
        return entry
    combo, reason = entry
    return (f"{combo.task}:{combo.body_label}", combo.joint, reason)


def cmd_predict(args, config) -> int:
    table = CoefficientTable.from_csv(args.table)
    terms = [pipeline.parse_term(t) for t in args.term]
    if not terms:
        raise DomainError("at least one --term is required")
    try:
        value = predict_peak_torque(terms, table, args.percentile)
    except KeyError as exc:
        raise DomainError(str(exc.args[0])) from None
    rows = [(c.joint, c.task, c.body_label, s, table.get(c, args.percentile).K)
            for c, s in terms]
    rows.append(("total", "", "", "", value))
    io.write_csv(_out(args, config) / "prediction.csv",
                 ("joint", "task", "body", "scalar", "torque_or_K"), rows)
    print(f"p{args.percentile:g} torque: {value:.6g} N m")
    return 0


def cmd_optimize_wrist(args, config) -> int:
    wcfg = config["wrist"]
    caps = tuple(wcfg["caps"])
    if bool(args.store) == bool(args.samples):
        raise DomainError("give exactly one of --store or --samples")
    if args.samples:
        angles, tau, vel = io.read_wrist_samples(args.samples)
        samples = WristSampleSet(tau, vel, angles, caps)
    else:
        records = io.read_records(_store_file(Path(args.store), "records.csv"))
        samples = pipeline.wrist_samples_from_records(records, wcfg["hand_mass"], caps)
    kinds = args.kinds.split(",") if args.kinds is not None else wcfg["kinds"]
    kinds = [k for k in (s.strip() for s in kinds) if k]
    bad = [k for k in kinds if k not in KINDS]
    if bad:
        raise DomainError(f"unknown configuration kind(s) {bad}; choose from {KINDS}")
    report = pipeline.optimize_wrist(samples, kinds, wcfg["grid_step"], wcfg["refine"],
                                     wcfg["torque_map"])
    out = _out(args, config)
    io.write_csv(out / "wrist_table.csv", pipeline.WRIST_HEADER, report.rows)
    stats = {"pearson_r": float(f"{report.correlation.r:.6g}"),
             "pearson_p": float(f"{report.correlation.p_value:.6g}"),
             "n_samples": report.correlation.n,
             "pc_explained": [float(f"{v:.6g}") for v in report.pca.explained],
             "pc1": [float(f"{v:.6g}") for v in report.pca.components[0]],
             "reductions_pct": {k: float(f"{100 * r.reduction:.6g}")
                                for k, r in report.results.items()}}
    _json(out / "wrist_stats.json", stats)
    io.atomic_write(out / "wrist.svg", report.svg)
    for k, r in report.results.items():
        print(f"{k}: objective {r.value:.6g} W ({100 * r.reduction:.1f}% below baseline)")
    return 0


def cmd_summarize(args, config) -> int:
    started = time.perf_counter()
    rows, manifest = pipeline.summarize(config, args.trajectories, slow=args.slow_down)
    out = _out(args, config)
    header = list(rows[0]) if rows else ["task", "joint"]
    io.write_csv(out / "kinematics.csv", header, [[r[h] for h in header] for r in rows])
    _json(out / "summary_manifest.json", _with_timing(args, manifest.to_dict(), started))
    print(f"{len(rows)} summary row(s); output in {out}")
    return 0


# --------------------------------------------------------------------------
# Parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adlreq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (defaults apply when omitted)")
        p.add_argument("--out", help="output directory (default: config output_dir)")
        p.add_argument("--seed", type=int, help="seed for synthetic generation")
        p.set_defaults(func=func)
        return p

    p = command("synthesize", cmd_synthesize, "write seeded minimum-jerk trial files")
    p.add_argument("--task", default="III")
    p.add_argument("--subjects", type=int, default=1)
    p.add_argument("--trials", type=int, default=2, help="repetitions per subject")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--moves", type=int, default=3)
    p.add_argument("--peak-speed", type=float, help="cap on joint speed (deg/s)")

    p = command("simulate", cmd_simulate, "inverse dynamics over the model stack")
    p.add_argument("trajectories", nargs="+", help="joint-angle CSV files")
    p.add_argument("--timing", action="store_true", help="record wall time in the manifest")

    p = command("fit", cmd_fit, "fit percentile regressors from a record store")
    p.add_argument("--store", required=True, help="directory written by simulate")

    p = command("predict", cmd_predict, "peak torque of a composite limb")
    p.add_argument("--table", required=True, help="coefficients.csv written by fit")
    p.add_argument("--term", action="append", default=[],
                   help="JOINT:TASK:BODY[:ITEM]=SCALAR (repeatable)")
    p.add_argument("--percentile", type=float, default=100.0)

    p = command("optimize-wrist", cmd_optimize_wrist, "optimize wrist drive axes")
    p.add_argument("--store", help="directory written by simulate")
    p.add_argument("--samples", help="CSV with tau_WF, tau_WD, vel_WF, vel_WD columns")
    p.add_argument("--kinds", help="comma-separated subset of SO,SNO,DO,DNO")

    p = command("summarize", cmd_summarize, "kinematic range and velocity summary")
    p.add_argument("trajectories", nargs="+")
    p.add_argument("--slow-down", action="store_true", help="apply velocity caps first")
    p.add_argument("--timing", action="store_true", help="record wall time in the manifest")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = PipelineConfig.load(args.config)
        return args.func(args, config)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AdlReqError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
