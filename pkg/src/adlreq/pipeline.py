"""Batch pipeline behind the command-line interface.

Every function here is a pure function of its inputs; file handling lives
in :mod:`adlreq.cli`.
"""
from __future__ import annotations

import hashlib
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import metadata as importlib_metadata
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from .chain import build_default_chain, generate_model_stack, model_name, HandModel
from .config import PipelineConfig
from .dynamics import (Provenance, TorqueRecord, inverse_dynamics, object_pose_from_hand,
                       object_torques, object_wrench, screen_torque_outliers,
                       static_task_wrench)
from .errors import AdlReqError, DomainError, NonRegressableError
from .regression import CoefficientTable, ComboKey, build_design, fit_all, pca2, pearson
from .svg import SvgCanvas
from .trajectory import (JointTrajectory, VelocityCaps, differentiate, load_trajectory,
                         lowpass_filter, screen_velocity_outliers, slow_down,
                         summarize_kinematics)
from .wrist import (BASELINE, DriveConfig, WristSampleSet, axis_requirements, optimize)

log = logging.getLogger(__name__)


def _version() -> str:
    try:
        return importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return "unknown"


def versions() -> dict:
    return {"adlreq": _version(), "numpy": np.__version__, "scipy": scipy.__version__}


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class Manifest:
    """Bookkeeping of one run. Every excluded trial names exactly one rule."""

    config_sha256: str
    inputs: list = field(default_factory=list)
    stages: dict = field(default_factory=dict)
    exclusions: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    versions: dict = field(default_factory=versions)

    def exclude(self, trial: str, stage: str, rule: str) -> None:
        self.exclusions.append({"trial": trial, "stage": stage, "rule": rule})

    def to_dict(self) -> dict:
        return {"config_sha256": self.config_sha256, "inputs": self.inputs,
                "stages": self.stages, "exclusions": self.exclusions,
                "notes": self.notes, "versions": self.versions}


@dataclass
class SimulationResult:
    records: list
    design: dict
    manifest: Manifest


def load_trials(paths: Sequence, manifest: Manifest) -> list[JointTrajectory]:
    trials = []
    for path in paths:
        traj = load_trajectory(path)
        md = dict(traj.metadata)
        md.setdefault("task", "ALL")
        md.setdefault("subject", Path(path).stem)
        md.setdefault("repetition", "1")
        trials.append(JointTrajectory(traj.time, traj.angles, traj.joints, md))
        manifest.inputs.append({"file": str(path), "sha256": file_digest(path)})
    labels = [t.label for t in trials]
    dupes = sorted({x for x in labels if labels.count(x) > 1})
    if dupes:
        raise DomainError(f"duplicate trial identities {dupes}")
    return trials


def _screen_velocities(config, trials, velocities, manifest):
    keep = set(range(len(trials)))
    by_task = defaultdict(list)
    for i, t in enumerate(trials):
        by_task[t.metadata["task"]].append(i)
    for task, idx in sorted(by_task.items()):
        if not config["screening"]["velocity"]:
            continue
        if len(idx) < 4:
            manifest.notes.append(f"velocity screening skipped for task {task}: "
                                  f"{len(idx)} trial(s) < 4")
            continue
        part = screen_velocity_outliers([velocities[i] for i in idx])
        for k in part.excluded:
            keep.discard(idx[k])
            manifest.exclude(trials[idx[k]].label, "velocity", part.reasons[k])
    return sorted(keep)


def design_points(config: PipelineConfig) -> dict:
    """Design value of every regressable model and object variant."""
    geometry = config.geometry()
    stack = generate_model_stack(geometry, config["masses"], config["fractions"],
                                 config["cylinder_diameter"])
    mean = config.mean_lengths()
    design = {m.name: build_design(m, mean) for m in stack}
    for obj in config.objects():
        try:
            design[obj.variant] = build_design(obj)
        except NonRegressableError:
            continue
    return design


def simulate(config: PipelineConfig, paths: Sequence) -> SimulationResult:
    """Filter, differentiate and screen trials, then run inverse dynamics
    over the limb-model stack and the task objects."""
    manifest = Manifest(config.digest())
    trials = load_trials(paths, manifest)
    order, cutoff = config["filter"]["order"], config["filter"]["cutoff"]
    filtered = [lowpass_filter(t, order, cutoff) for t in trials]
    velocities = [differentiate(f) for f in filtered]
    kept = _screen_velocities(config, trials, velocities, manifest)
    manifest.stages["velocity_screen"] = {"input": len(trials), "kept": len(kept),
                                          "excluded": len(trials) - len(kept)}

    stacks: dict = {}
    records: list[TorqueRecord] = []
    simulated = []
    for i in kept:
        traj = filtered[i]
        md = traj.metadata
        subject = str(md["subject"])
        if subject not in stacks:
            geometry = config.geometry(subject if subject in config["subject_geometry"] else None)
            stacks[subject] = (build_default_chain(geometry),
                               generate_model_stack(geometry, config["masses"],
                                                    config["fractions"],
                                                    config["cylinder_diameter"]))
        chain, stack = stacks[subject]
        try:
            trial_records = []
            for model in stack:
                trial_records.append(inverse_dynamics(chain, model, traj))
            trial_records.extend(_object_records(config, chain, traj))
        except (AdlReqError, ValueError, FloatingPointError) as exc:
            manifest.exclude(traj.label, "dynamics", f"dynamics-error: {exc}")
            continue
        records.extend(trial_records)
        simulated.append(traj.label)

    records, torque_excluded = _screen_torques(config, records, manifest)
    manifest.stages["torque_screen"] = {"input": len(simulated),
                                        "kept": len(simulated) - torque_excluded,
                                        "excluded": torque_excluded}
    manifest.stages["records"] = len(records)
    return SimulationResult(records, design_points(config), manifest)


def _object_records(config, chain, traj):
    task = str(traj.metadata["task"])
    share = config["bimanual_share"] if task in config["bimanual_tasks"] else 1.0
    out = []
    for obj in config.objects(task):
        if obj.mass is not None:
            poses = object_pose_from_hand(chain, traj, obj.grasp_offset)
            wrench = object_wrench(obj, traj.time, poses)
        else:
            wrench = static_task_wrench(obj.axis, obj.static_torque, traj.n_frames)
        prov = Provenance(task, str(traj.metadata["subject"]), str(traj.metadata["repetition"]),
                          "Object", obj.variant, obj.name)
        out.append(object_torques(chain, traj, wrench.scaled(share), provenance=prov))
    return out


def _screen_torques(config, records, manifest):
    if not config["screening"]["torque"]:
        return records, 0
    # Humerus torques are negligible (and hidden from reports); a 3x-median
    # rule on near-zero peaks would flag noise, so only ulna and hand models vote.
    groups = defaultdict(list)
    for rec in records:
        if rec.provenance.body in ("ulna", "hand"):
            groups[(rec.provenance.task, rec.provenance.model)].append(rec)
    flagged: dict = {}
    for (task, model), recs in sorted(groups.items()):
        if len(recs) < 2:
            continue
        part = screen_torque_outliers(recs)
        for k in part.excluded:
            label = "/".join(recs[k].provenance.trial)
            flagged.setdefault(label, f"{part.reasons[k]} (model {model})")
    for label, rule in sorted(flagged.items()):
        manifest.exclude(label, "torque", rule)
    kept = [r for r in records if "/".join(r.provenance.trial) not in flagged]
    return kept, len(flagged)


def fit(records: Sequence[TorqueRecord], design: dict) -> CoefficientTable:
    if not records:
        raise DomainError("record store is empty")
    table = fit_all(records, design)
    missing = sorted({(r.provenance.task, r.provenance.model) for r in records
                      if r.provenance.model not in design})
    for task, model in missing:
        table.skipped.append((task, model, "non-regressable or no design value"))
    return table


def parse_term(text: str):
    """``JOINT:TASK:BODY[:ITEM]=SCALAR`` -> (ComboKey, scalar)."""
    lhs, sep, rhs = text.partition("=")
    parts = lhs.split(":")
    if not sep or len(parts) not in (3, 4):
        raise DomainError(f"term {text!r} must look like JOINT:TASK:BODY[:ITEM]=VALUE")
    try:
        scalar = float(rhs)
    except ValueError:
        raise DomainError(f"term {text!r} has a non-numeric value") from None
    return ComboKey(*parts), scalar


# --------------------------------------------------------------------------
# Wrist

WRIST_HEADER = ("config", "axis", "theta", "rom", "rom_pct", "tau", "tau_pct", "nu", "nu_pct",
                "P", "P_pct", "objective")


def wrist_samples_from_records(records, hand_mass: float, caps) -> WristSampleSet:
    name = model_name(HandModel(hand_mass, (0, 0, 0), np.zeros((3, 3))))
    chosen = [r for r in records if r.provenance.model == name]
    if not chosen:
        raise DomainError(f"store has no records of hand model {name}")
    for joint in ("WF", "WD"):
        if joint not in chosen[0].joints:
            raise DomainError(f"records lack {joint}")
    cols = [chosen[0].joints.index("WF"), chosen[0].joints.index("WD")]
    return WristSampleSet(np.vstack([r.torques[:, cols] for r in chosen]),
                          np.vstack([r.velocities[:, cols] for r in chosen]),
                          np.vstack([r.angles[:, cols] for r in chosen]), caps)


@dataclass
class WristReport:
    rows: list
    results: dict
    correlation: object
    pca: object
    svg: str


def optimize_wrist(samples: WristSampleSet, kinds: Sequence[str], grid_step: float = 1.0,
                   refine: bool = True, torque_map: str = "consistent") -> WristReport:
    rows = []
    baseline = axis_requirements(BASELINE, samples)
    base_obj = None
    results = {}
    for req, label in zip(baseline, ("WF", "WD")):
        rows.append(_wrist_row("baseline", label, req, None))
    for kind in kinds:
        res = optimize(kind, samples, grid_step, refine, torque_map)
        results[kind] = res
        base_obj = res.baseline
        for req in axis_requirements(res.config, samples):
            rows.append(_wrist_row(kind, req.axis, req, res.value))
    if base_obj is not None:
        rows[0][-1] = rows[1][-1] = base_obj
    corr = pearson(samples.tau[:, 0], samples.tau[:, 1])
    pcs = pca2(samples.tau)
    return WristReport(rows, results, corr, pcs, wrist_svg(samples, pcs, results))


def _wrist_row(kind, axis, req, value):
    return [kind, axis, req.theta, req.rom, req.rom_change, req.tau_max, req.tau_change,
            req.nu_max, req.nu_change, req.p_max, req.p_change,
            value if value is not None else ""]


_COLORS = {"SO": "#1f5fbf", "SNO": "#c0392b", "DO": "#2e8b57", "DNO": "#7d3c98"}


def wrist_svg(samples: WristSampleSet, pcs, results: dict, max_points: int = 1500) -> str:
    """Torque samples (normalized), principal components and optimized axes."""
    tau = samples.tau
    scale = np.sqrt((tau**2).sum(axis=1)).max() or 1.0
    pts = tau / scale
    step = max(1, len(pts) // max_points)
    canvas = SvgCanvas(xlim=(-1.1, 1.1), ylim=(-1.1, 1.1))
    canvas.line(-1.1, 0, 1.1, 0, "#bbbbbb")
    canvas.line(0, -1.1, 0, 1.1, "#bbbbbb")
    for x, y in pts[::step]:
        canvas.circle(x, y, 1.2, "#8e44ad", 0.35)
    for k, (vec, frac) in enumerate(zip(pcs.components, pcs.explained)):
        canvas.line(-vec[0], -vec[1], vec[0], vec[1], "black" if k == 0 else "grey", 1.2, "4,3")
    peak = max((r.value for r in results.values()), default=1.0) or 1.0
    for kind, res in results.items():
        powers = axis_requirements(res.config, samples)
        for req, theta in zip(powers, (res.config.theta_a, res.config.theta_b)):
            length = req.p_max / peak
            t = np.radians(theta)
            canvas.line(0, 0, length * np.cos(t), length * np.sin(t), _COLORS[kind], 2.0)
        canvas.text(-1.05, 1.0 - 0.08 * list(results).index(kind), kind, color=_COLORS[kind])
    canvas.text(1.05, -1.05, "WF torque (norm.)", anchor="end")
    canvas.text(-1.05, -1.05, f"PC1 {100 * pcs.explained[0]:.1f}%", size=10)
    return canvas.to_string()


# --------------------------------------------------------------------------
# Kinematics summary

def summarize(config: PipelineConfig, paths: Sequence, slow: bool = False,
              percentiles=(50.0, 99.0, 100.0)) -> tuple[list, Manifest]:
    manifest = Manifest(config.digest())
    trials = load_trials(paths, manifest)
    order, cutoff = config["filter"]["order"], config["filter"]["cutoff"]
    filtered = [lowpass_filter(t, order, cutoff) for t in trials]
    if slow:
        caps = VelocityCaps.from_percentile((differentiate(f) for f in filtered),
                                            config["cap_percentile"],
                                            overrides=config.caps_overrides())
        manifest.notes.append("slowed with caps " + ", ".join(
            f"{j}=({lo:.6g}, {hi:.6g})" for j, (lo, hi) in sorted(caps.limits.items())))
        filtered = [slow_down(f, caps) for f in filtered]
    return summarize_kinematics(filtered, percentiles), manifest
