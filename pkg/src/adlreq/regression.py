"""Percentile torques, through-origin linear regressors and the small
statistics (Pearson correlation, two-dimensional PCA) used in reports."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .chain import REPORTING_JOINTS, LimbModel
from .errors import DomainError, NonRegressableError, PercentileRefusal
from .dynamics import ObjectModel, TorqueRecord

PERCENTILES = (0, 25, 50, 75, 100)
BODIES = ("Humerus", "Ulna", "Hand", "Object")
TASKS = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X")
NON_REGRESSABLE = frozenset({"Cup", "Knob"})

_BODY_LABEL = {"humerus": "Humerus", "ulna": "Ulna", "hand": "Hand"}


@dataclass(frozen=True, order=True)
class ComboKey:
    """Joint, task and body of a regressor. ``item`` names the object for
    ``body == "Object"`` and is empty otherwise."""

    joint: str
    task: str
    body: str
    item: str = ""

    def __post_init__(self):
        if not (self.joint and self.task and self.body):
            raise DomainError("joint, task and body must all be set")
        if self.body not in BODIES:
            raise DomainError(f"body must be one of {BODIES}, got {self.body!r}")
        if (self.body == "Object") != bool(self.item):
            raise DomainError("item is required for Object combos and only for them")

    @property
    def body_label(self) -> str:
        return f"Object:{self.item}" if self.item else self.body

    @classmethod
    def parse(cls, joint: str, task: str, body_label: str) -> "ComboKey":
        body, _, item = body_label.partition(":")
        return cls(joint, task, body, item)


@dataclass(frozen=True)
class RegressorEntry:
    combo: ComboKey
    percentile: float
    K: float
    R: float
    n_points: int


@dataclass
class CoefficientTable:
    entries: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def add(self, entry: RegressorEntry) -> None:
        key = (entry.combo, float(entry.percentile))
        if key in self.entries:
            raise DomainError(f"duplicate entry for {key}")
        self.entries[key] = entry

    def get(self, combo: ComboKey, percentile: float) -> RegressorEntry:
        try:
            return self.entries[(combo, float(percentile))]
        except KeyError:
            raise KeyError(f"no regressor for {combo} at p={percentile:g}") from None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(sorted(self.entries.values(), key=_entry_order))

    def combos(self) -> list:
        return sorted({c for c, _ in self.entries})

    def visible(self, include_humerus: bool = False) -> list:
        """Entries of the default report; humerus combos hidden unless asked."""
        return [e for e in self if include_humerus or e.combo.body != "Humerus"]

    # persistence ----------------------------------------------------------
    CSV_FIELDS = ("joint", "task", "body", "percentile", "K", "R", "n")

    def to_csv(self, path) -> None:
        from .io import write_csv
        rows = [(e.combo.joint, e.combo.task, e.combo.body_label, f"{e.percentile:g}",
                 f"{e.K:.6g}", f"{e.R:.6g}", e.n_points) for e in self]
        write_csv(path, self.CSV_FIELDS, rows)

    @classmethod
    def from_csv(cls, path) -> "CoefficientTable":
        table = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                combo = ComboKey.parse(row["joint"], row["task"], row["body"])
                table.add(RegressorEntry(combo, float(row["percentile"]), float(row["K"]),
                                         float(row["R"]), int(row["n"])))
        return table

    def to_nested(self) -> dict:
        """Task -> joint -> body -> percentile -> {K, R, n}."""
        nested: dict = {}
        for e in self:
            slot = (nested.setdefault(e.combo.task, {}).setdefault(e.combo.joint, {})
                    .setdefault(e.combo.body_label, {}))
            slot[f"{e.percentile:g}"] = {"K": float(f"{e.K:.6g}"), "R": float(f"{e.R:.6g}"),
                                        "n": e.n_points}
        return {"metadata": self.metadata, "coefficients": nested}

    def to_json(self, path) -> None:
        from .io import atomic_write
        atomic_write(path, json.dumps(self.to_nested(), indent=2, sort_keys=True) + "\n")


def _entry_order(e: RegressorEntry):
    task = TASKS.index(e.combo.task) if e.combo.task in TASKS else len(TASKS)
    joint = (REPORTING_JOINTS.index(e.combo.joint)
             if e.combo.joint in REPORTING_JOINTS else len(REPORTING_JOINTS))
    return (task, e.combo.task, joint, BODIES.index(e.combo.body), e.combo.item, e.percentile)


# --------------------------------------------------------------------------
# Percentiles and fitting

def percentile(samples, p: float) -> float:
    """Signed percentile with linear interpolation between closest ranks."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise DomainError("percentile of an empty sample")
    if not 0 <= p <= 100:
        raise DomainError(f"percentile must lie in [0, 100], got {p}")
    return float(np.percentile(samples, p, method="linear"))


def fit_lrm(X, y) -> tuple[float, float]:
    """Through-origin least squares ``y = K X``.

    ``R = 1 - sum((y - K X)^2) / sum(y^2)``; all-zero ``y`` gives ``K = 0,
    R = 1``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape != y.shape or X.ndim != 1 or X.size < 2:
        raise DomainError("X and y must be equal-length vectors with at least 2 points")
    sxx = float(X @ X)
    if sxx == 0:
        raise DomainError("design vector X is all zero")
    K = float(X @ y) / sxx
    syy = float(y @ y)
    if syy == 0:
        return K, 1.0
    resid = y - K * X
    return K, 1.0 - float(resid @ resid) / syy


@dataclass(frozen=True)
class DesignPoint:
    """Regressor input of one simulated model: its combo body and scalar X."""

    body: str
    item: str
    x: float


def build_design(model: LimbModel | ObjectModel, mean_lengths: Mapping[str, float] | None = None
                 ) -> DesignPoint:
    """Independent variable of one model.

    Cylinders give ``m * d`` with ``d`` the CoM fraction times the mean
    segment length; hands and mass objects give the mass; static-torque
    objects give the torque magnitude.
    """
    if isinstance(model, ObjectModel):
        if model.name in NON_REGRESSABLE:
            raise NonRegressableError(
                f"{model.name}: torques could not be described by linear models")
        return DesignPoint("Object", model.name, abs(float(model.load)))
    source = model.source
    if source is None:
        raise DomainError(f"{model.name} has no single dynamic source")
    if hasattr(source, "com_fraction"):
        mean_lengths = mean_lengths or {}
        length = mean_lengths.get(source.attached_body, source.segment_length)
        return DesignPoint(_BODY_LABEL[source.attached_body], "",
                           source.mass * source.com_fraction * length)
    return DesignPoint("Hand", "", float(source.mass))


def fit_all(records: Iterable[TorqueRecord], design: Mapping[str, DesignPoint],
            percentiles: Sequence[float] = PERCENTILES) -> CoefficientTable:
    """Fit one regressor per (joint, task, body, percentile).

    Torque samples are pooled across all records of a (task, model) pair,
    the percentile is taken per joint, and the percentiles of all models of
    a combo are regressed against their design values. Combos with fewer
    than two design points are listed in ``table.skipped``.
    """
    pooled: dict = defaultdict(list)
    joints = None
    for rec in records:
        key = rec.provenance.model
        if key not in design:
            continue
        pooled[(rec.provenance.task, key)].append(rec.torques)
        joints = joints or rec.joints
    groups: dict = defaultdict(list)  # (task, body, item) -> [(x, samples)]
    for (task, key), chunks in pooled.items():
        point = design[key]
        groups[(task, point.body, point.item)].append((point.x, np.vstack(chunks)))
    table = CoefficientTable(metadata={"percentiles": list(percentiles)})
    for (task, body, item), points in sorted(groups.items()):
        points.sort(key=lambda pt: pt[0])
        X = np.array([pt[0] for pt in points])
        for j, joint in enumerate(joints or ()):
            combo = ComboKey(joint, task, body, item)
            if len(points) < 2 or not np.any(X):
                table.skipped.append((combo, f"{len(points)} design point(s)"))
                continue
            for p in percentiles:
                y = np.array([percentile(pt[1][:, j], p) for pt in points])
                K, R = fit_lrm(X, y)
                table.add(RegressorEntry(combo, float(p), K, R, len(points)))
    return table


def predict_peak_torque(composition: Sequence[tuple], table: CoefficientTable,
                        percentile: float) -> float:
    """``sum(K_i * scalar_i)`` for the 0th or 100th percentile."""
    if float(percentile) not in (0.0, 100.0):
        raise PercentileRefusal(
            f"p={percentile:g}: component quartile torques cannot be summed to "
            "quartiles of a composite; only 0 and 100 are additive")
    return float(sum(table.get(combo, percentile).K * scalar for combo, scalar in composition))


# --------------------------------------------------------------------------
# Statistics

@dataclass(frozen=True)
class Correlation:
    r: float
    p_value: float
    n: int


def pearson(x, y) -> Correlation:
    """Sample Pearson correlation with a two-sided t-test p-value (n-2 dof)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise DomainError("x and y must be equal-length vectors of at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise DomainError("pearson correlation needs nonzero variance in both inputs")
    r = float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))
    n = x.size
    if n <= 2 or abs(r) == 1.0:
        p = 0.0 if abs(r) == 1.0 and n > 2 else 1.0
    else:
        t = r * np.sqrt((n - 2) / (1 - r * r))
        p = float(2 * stats.t.sf(abs(t), n - 2))
    return Correlation(r, p, n)


@dataclass(frozen=True, eq=False)
class PCAResult:
    components: np.ndarray   # rows are unit vectors, descending variance
    explained: np.ndarray    # fractions summing to 1
    variances: np.ndarray
    mean: np.ndarray


def pca2(samples) -> PCAResult:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2 or samples.shape[0] < 2:
        raise DomainError("pca2 needs an (n >= 2, 2) sample matrix")
    mean = samples.mean(axis=0)
    cov = np.cov(samples - mean, rowvar=False)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order].T
    total = values.sum()
    if total <= 0:
        raise DomainError("covariance has rank 0")
    for k in range(2):
        nz = np.flatnonzero(np.abs(vectors[k]) > 1e-15)
        if nz.size and vectors[k, nz[0]] < 0:
            vectors[k] = -vectors[k]
    return PCAResult(vectors, values / total, values, mean)
