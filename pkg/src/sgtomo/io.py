"""JSON file formats for axis sets, measurements, states and reports.

Complex matrices are stored row-major as nested lists of ``[re, im]``
pairs.  Every document carries ``schema_version`` and explicit units.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .density import DensityMatrix, validate
from .errors import ParseError, RecordMismatch, TomographyError
from .spin import MeasurementAxis, SpinSystem
from .tomography import AxisSet, ConditioningReport, MeasurementRecord

SCHEMA_VERSION = 1


def matrix_to_json(mat) -> list:
    mat = np.asarray(mat, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("matrix must be a square array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from exc


def _field(doc, key, path, kind=None):
    if not isinstance(doc, dict) or key not in doc:
        raise ParseError(f"missing field {key!r}", path)
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ParseError(f"field {key!r} has the wrong type", path)
    return value


# --- axis sets ----------------------------------------------------------------


def axes_to_json(axes: AxisSet) -> list:
    return [{"theta_deg": t, "phi_deg": p} for t, p in axes.degrees()]


def axes_from_json(data, path=None) -> AxisSet:
    if not isinstance(data, list) or not data:
        raise ParseError("axis set must be a non-empty JSON array", path)
    axes = []
    for k, entry in enumerate(data):
        try:
            axes.append(MeasurementAxis.from_degrees(float(entry["theta_deg"]), float(entry["phi_deg"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"axis {k}: expected {{theta_deg, phi_deg}} ({exc})", path) from exc
    return AxisSet(tuple(axes))


def save_axis_set(path, axes: AxisSet) -> None:
    write_json(path, axes_to_json(axes))


def load_axis_set(path) -> AxisSet:
    return axes_from_json(read_json(path), path)


# --- measurements ---------------------------------------------------------------


def save_measurements(path, sys: SpinSystem, axes: AxisSet, records, provenance=None) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "measurements",
        "spin": sys.label(),
        "two_f": sys.two_f,
        "angle_unit": "deg",
        "axes": axes_to_json(axes),
        "records": [{"axis_index": r.axis_index, "populations": [float(p) for p in r.populations]} for r in records],
    }
    if provenance:
        doc["provenance"] = provenance
    write_json(path, doc)


def load_measurements(path):
    """Read a measurement file; returns ``(spin, axes or None, records, doc)``."""
    doc = read_json(path)
    two_f = _field(doc, "two_f", path, int)
    try:
        sys = SpinSystem(two_f)
    except ValueError as exc:
        raise ParseError(str(exc), path) from exc
    axes = axes_from_json(doc["axes"], path) if "axes" in doc else None
    raw = _field(doc, "records", path, list)
    records = []
    for k, entry in enumerate(raw):
        try:
            idx = int(entry.get("axis_index", k))
            pops = entry["populations"]
        except (AttributeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"record {k}: expected {{axis_index, populations}}", path) from exc
        try:
            records.append(MeasurementRecord.from_raw(idx, pops, provenance=str(path)))
        except (ValueError, TypeError) as exc:
            if isinstance(exc, RecordMismatch):
                raise
            raise ParseError(f"record {k}: {exc}", path) from exc
    return sys, axes, records, doc


# --- states ---------------------------------------------------------------


def save_density(path, rho: DensityMatrix, label=None) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "density_matrix",
        "spin": rho.system.label(),
        "two_f": rho.system.two_f,
        "basis": "m ascending from -F",
        "matrix": matrix_to_json(rho.entries),
    }
    if label:
        doc["label"] = label
    write_json(path, doc)


def density_from_doc(doc, path=None) -> DensityMatrix:
    """Accept a density-matrix document or a reconstruction report (uses the fitted state)."""
    if isinstance(doc, dict) and doc.get("kind") == "reconstruction":
        doc = _field(doc, "ml", path, dict)
    try:
        mat = matrix_from_json(_field(doc, "matrix", path, list))
    except ValueError as exc:
        raise ParseError(str(exc), path) from exc
    try:
        return validate(mat)
    except TomographyError as exc:
        raise ParseError(f"not a valid density matrix: {exc}", path) from exc


def load_density(path) -> DensityMatrix:
    return density_from_doc(read_json(path), path)


# --- reports ---------------------------------------------------------------


def conditioning_to_json(report: ConditioningReport) -> dict:
    return {
        "eigenvalues": [float(x) for x in report.eigenvalues],
        "rank": report.rank,
        "required_rank": report.n_params,
        "threshold": report.threshold,
        "full_rank": report.full_rank,
        "condition_number": report.condition_number if report.full_rank else None,
    }


def error_stub(code: str, message: str, **extra) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "status": "error", "error_code": code, "message": message}
    doc.update(extra)
    return doc
