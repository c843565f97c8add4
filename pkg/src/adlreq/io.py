"""Deterministic CSV persistence for torque records, design points and wrenches."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from itertools import groupby
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Provenance, SpatialWrench, TorqueRecord
from .errors import ParseError
from .regression import DesignPoint

PROVENANCE_FIELDS = ("task", "subject", "repetition", "body", "model", "object")


def fmt(value) -> str:
    """Six significant digits; integers and strings pass through."""
    if isinstance(value, (str, int, np.integer)) and not isinstance(value, bool):
        return str(value)
    value = float(value)
    if value == 0:
        return "0"
    return f"{value:.6g}"


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write(path, csv_text(header, rows))


# --------------------------------------------------------------------------
# Torque records

def _record_header(joints):
    cols = list(PROVENANCE_FIELDS) + ["time"]
    for kind in ("angle", "vel", "tau"):
        cols += [f"{kind}_{j}" for j in joints]
    return cols


def records_csv(records: Sequence[TorqueRecord]) -> str:
    if not records:
        return csv_text(_record_header(()), [])
    joints = records[0].joints
    rows = []
    for rec in records:
        prov = [getattr(rec.provenance, f) for f in PROVENANCE_FIELDS]
        block = np.hstack([rec.time[:, None], rec.angles, rec.velocities, rec.torques])
        rows.extend(prov + list(r) for r in block)
    return csv_text(_record_header(joints), rows)


def write_records(path, records: Sequence[TorqueRecord]) -> None:
    atomic_write(path, records_csv(records))


def read_records(path) -> list[TorqueRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:6]) != PROVENANCE_FIELDS:
            raise ParseError(f"{path}: not a torque record store")
        joints = tuple(h[len("tau_"):] for h in header if h.startswith("tau_"))
        nj = len(joints)
        records = []
        for key, rows in groupby(reader, key=lambda r: tuple(r[:6])):
            data = np.array([[float(v) for v in r[6:]] for r in rows])
            if data.shape[1] != 1 + 3 * nj:
                raise ParseError(f"{path}: malformed record {key}")
            records.append(TorqueRecord(data[:, 0], data[:, 1 + 2 * nj:], data[:, 1:1 + nj],
                                        data[:, 1 + nj:1 + 2 * nj], Provenance(*key), joints))
    return records


# --------------------------------------------------------------------------
# Design points

DESIGN_FIELDS = ("model", "body", "item", "x")


def write_design(path, design: dict) -> None:
    rows = [(name, p.body, p.item, p.x) for name, p in sorted(design.items())]
    write_csv(path, DESIGN_FIELDS, rows)


def read_design(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["model"]: DesignPoint(row["body"], row["item"], float(row["x"]))
                for row in csv.DictReader(fh)}


# --------------------------------------------------------------------------
# Wrenches and wrist samples

WRENCH_FIELDS = ("time", "fx", "fy", "fz", "mx", "my", "mz")


def write_wrench(path, time, wrench: SpatialWrench) -> None:
    write_csv(path, WRENCH_FIELDS, np.column_stack([time, wrench.as_array()]))


def read_wrench(path) -> tuple[np.ndarray, SpatialWrench]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], SpatialWrench(data[:, 1:4], data[:, 4:7])


WRIST_FIELDS = ("angle_WF", "angle_WD", "tau_WF", "tau_WD", "vel_WF", "vel_WD")


def read_wrist_samples(path):
    """Angles, torques and velocities (each (n, 2), WF then WD) from a sample CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in WRIST_FIELDS[2:] if f not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}")
        rows = list(reader)
    if not rows:
        raise ParseError(f"{path}: no samples")

    def cols(a, b):
        return np.array([[float(r[a]), float(r[b])] for r in rows])

    has_angles = all(f in rows[0] for f in WRIST_FIELDS[:2])
    angles = cols("angle_WF", "angle_WD") if has_angles else None
    return angles, cols("tau_WF", "tau_WD"), cols("vel_WF", "vel_WD")
