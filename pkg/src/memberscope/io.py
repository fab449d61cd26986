"""Experiment and POVM files, builtin fixtures and state specifications.

Experiment files are JSON::

    {"format": "memberscope-experiment", "version": 1,
     "angle_unit": "pi_fractions" | "radians",
     "label": "...",
     "bases": [{"name": "B1", "theta1": 0, "phi1": 0, "theta2": 0, "phi2": 0,
                "counts": {"HH": 12, "HV": 480, "VH": 500, "VV": 8}}, ...],
     "metadata": {...}}

Each basis carries exactly one of ``counts`` or ``probabilities``. POVM
angle files use the same ``bases`` entries without outcome data and
``"format": "memberscope-povm"``.
"""
from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from .membership import minimal_pure_povm
from .povm import OUTCOMES, BasisSetting, MeasurementRecord, Povm, povm_from_settings
from .states import (as_density, bloch_to_density, canonical_label, maximally_mixed,
                     named_state, projector, werner_state)

EXPERIMENT_FORMAT = "memberscope-experiment"
POVM_FORMAT = "memberscope-povm"
FORMAT_VERSION = 1
ANGLE_UNITS = {"radians": 1.0, "pi_fractions": math.pi}
ANGLE_KEYS = ("theta1", "phi1", "theta2", "phi2")
SUM_TOL = 1e-6
BUILTIN_POVMS = ("table1", "table2")


class SchemaError(ValueError):
    """Invalid file content; the message names the offending field path."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


# ---------------------------------------------------------------------------
# parsing helpers

def _read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(str(path), f"cannot read file ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}", f"invalid JSON ({exc.msg})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(str(path), "top level must be a JSON object")
    return doc


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(where, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise SchemaError(where, "must be finite")
    return float(value)


def _angle_scale(doc: dict) -> float:
    unit = doc.get("angle_unit", "radians")
    if unit not in ANGLE_UNITS:
        raise SchemaError("angle_unit", f"must be one of {sorted(ANGLE_UNITS)}, got {unit!r}")
    return ANGLE_UNITS[unit]


def _check_header(doc: dict, expected: str) -> None:
    fmt = doc.get("format", expected)
    if fmt != expected:
        raise SchemaError("format", f"expected {expected!r}, got {fmt!r}")
    version = doc.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise SchemaError("version", f"unsupported version {version!r}")


def _bases(doc: dict) -> list:
    bases = doc.get("bases")
    if not isinstance(bases, list) or not bases:
        raise SchemaError("bases", "must be a non-empty list")
    for k, entry in enumerate(bases):
        if not isinstance(entry, dict):
            raise SchemaError(f"bases[{k}]", "must be an object")
    return bases


def _setting(entry: dict, scale: float, where: str) -> BasisSetting:
    angles = []
    for key in ANGLE_KEYS:
        if key not in entry:
            raise SchemaError(f"{where}.{key}", "missing")
        angles.append(_number(entry[key], f"{where}.{key}") * scale)
    return BasisSetting(*angles, name=str(entry.get("name", "")))


def _outcomes(block, where: str) -> list[float]:
    if isinstance(block, list):
        if len(block) != len(OUTCOMES):
            raise SchemaError(where, f"expected {len(OUTCOMES)} values, got {len(block)}")
        return [_number(v, f"{where}[{i}]") for i, v in enumerate(block)]
    if not isinstance(block, dict):
        raise SchemaError(where, "must map HH, HV, VH, VV to values")
    extra = sorted(set(block) - set(OUTCOMES))
    if extra:
        raise SchemaError(where, f"unknown outcome keys {extra}")
    missing = [o for o in OUTCOMES if o not in block]
    if missing:
        raise SchemaError(where, f"missing outcome keys {missing}")
    return [_number(block[o], f"{where}.{o}") for o in OUTCOMES]


# ---------------------------------------------------------------------------
# experiments

def parse_experiment(doc: dict, label: str = "") -> MeasurementRecord:
    _check_header(doc, EXPERIMENT_FORMAT)
    scale = _angle_scale(doc)
    settings, rows, kinds = [], [], set()
    for k, entry in enumerate(_bases(doc)):
        where = f"bases[{k}]"
        settings.append(_setting(entry, scale, where))
        has_counts, has_probs = "counts" in entry, "probabilities" in entry
        if has_counts == has_probs:
            raise SchemaError(where, "needs exactly one of 'counts' or 'probabilities'")
        kind = "counts" if has_counts else "probabilities"
        values = _outcomes(entry[kind], f"{where}.{kind}")
        if any(v < 0 for v in values):
            raise SchemaError(f"{where}.{kind}", "values must be non-negative")
        total = sum(values)
        if total <= 0:
            raise SchemaError(f"{where}.{kind}", "basis block has zero total")
        # inclusive bound; six-digit tables can miss 1 by exactly 1e-6
        if kind == "probabilities" and abs(total - 1.0) > SUM_TOL + 1e-12:
            raise SchemaError(f"{where}.{kind}", f"probabilities sum to {total:.9g}, expected 1")
        kinds.add(kind)
        rows.append(values)
    data = np.array(rows, dtype=float)
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise SchemaError("metadata", "must be an object")
    label = str(doc.get("label", label))
    if kinds == {"counts"}:
        return MeasurementRecord.from_counts(settings, data, label=label, metadata=dict(metadata))
    totals = data.sum(axis=1, keepdims=True)
    # blocks already normalized to rounding level are kept bit-for-bit
    probs = np.where(np.abs(totals - 1.0) <= 1e-12, data, data / totals)
    return MeasurementRecord(tuple(settings), probs, label=label, metadata=dict(metadata))


def load_experiment(path) -> MeasurementRecord:
    """Read an experiment JSON file, or a CSV count table (see :func:`load_counts_csv`)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return load_counts_csv(path)
    doc = _read_json(path)
    try:
        return parse_experiment(doc, label=path.stem)
    except SchemaError as exc:
        raise SchemaError(f"{path}: {exc.where}", str(exc).split(": ", 1)[1]) from None


def load_counts_csv(path) -> MeasurementRecord:
    """CSV with header ``theta1,phi1,theta2,phi2,HH,HV,VH,VV`` (angles in radians).

    An optional ``unit`` column may hold ``pi_fractions`` per row; an
    optional ``name`` column labels the basis.
    """
    path = Path(path)
    settings, counts = [], []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        need = set(ANGLE_KEYS) | set(OUTCOMES)
        missing = sorted(need - set(reader.fieldnames or ()))
        if missing:
            raise SchemaError(f"{path}:1", f"missing columns {missing}")
        for row in reader:
            where = f"{path}:{reader.line_num}"
            try:
                unit = row.get("unit") or "radians"
                if unit not in ANGLE_UNITS:
                    raise SchemaError(where, f"unknown unit {unit!r}")
                values = {k: float(row[k]) for k in need}
            except (TypeError, ValueError) as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(where, "non-numeric value") from None
            scale = ANGLE_UNITS[unit]
            settings.append(BasisSetting(*(values[k] * scale for k in ANGLE_KEYS),
                                         name=row.get("name") or ""))
            block = [values[o] for o in OUTCOMES]
            if any(v < 0 for v in block):
                raise SchemaError(where, "negative count")
            if sum(block) <= 0:
                raise SchemaError(where, "basis block has zero total")
            counts.append(block)
    if not counts:
        raise SchemaError(str(path), "no data rows")
    return MeasurementRecord.from_counts(settings, np.array(counts), label=path.stem)


def _angle_entry(s: BasisSetting, scale: float) -> dict:
    entry = {"name": s.name} if s.name else {}
    for key, value in zip(ANGLE_KEYS, s.angles):
        entry[key] = value / scale
    return entry


def experiment_document(record: MeasurementRecord, angle_unit: str = "radians") -> dict:
    scale = ANGLE_UNITS[angle_unit]
    bases = []
    for k, s in enumerate(record.settings):
        entry = _angle_entry(s, scale)
        if record.counts is not None:
            entry["counts"] = {o: int(v) for o, v in zip(OUTCOMES, record.counts[k])}
        else:
            entry["probabilities"] = {o: float(v) for o, v in zip(OUTCOMES, record.probabilities[k])}
        bases.append(entry)
    return {"format": EXPERIMENT_FORMAT, "version": FORMAT_VERSION, "angle_unit": angle_unit,
            "label": record.label, "bases": bases, "metadata": dict(record.metadata)}


def dumps(doc) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_experiment(record: MeasurementRecord, path, angle_unit: str = "radians") -> None:
    write_atomic(path, dumps(experiment_document(record, angle_unit)))


# ---------------------------------------------------------------------------
# POVMs

def _data_path(name: str):
    return resources.files("memberscope").joinpath("data", name)


def parse_povm_settings(doc: dict) -> tuple[BasisSetting, ...]:
    if doc.get("format") != EXPERIMENT_FORMAT:
        _check_header(doc, POVM_FORMAT)
    scale = _angle_scale(doc)
    return tuple(_setting(entry, scale, f"bases[{k}]") for k, entry in enumerate(_bases(doc)))


def builtin_settings(name: str) -> tuple[BasisSetting, ...]:
    if name not in BUILTIN_POVMS:
        raise KeyError(f"unknown builtin POVM {name!r}; available: {', '.join(BUILTIN_POVMS)}")
    doc = json.loads(_data_path(f"{name}_povm.json").read_text())
    return parse_povm_settings(doc)


def builtin_experiment(name: str) -> MeasurementRecord:
    """``prep1`` or ``prep2``."""
    doc = json.loads(_data_path(f"{name}.json").read_text())
    return parse_experiment(doc, label=name)


def load_povm(spec: str) -> Povm:
    """Resolve a POVM: ``table1``, ``table2``, ``minimal-<state>`` or an angle file path.

    Experiment files are accepted too; their bases define the POVM.
    """
    if spec in BUILTIN_POVMS:
        return povm_from_settings(builtin_settings(spec), name=spec)
    if spec.startswith("minimal-"):
        label = canonical_label(spec[len("minimal-"):])
        povm = minimal_pure_povm(named_state(label))
        return Povm(povm.elements, name=f"minimal-{label}")
    path = Path(spec)
    if not path.exists():
        raise SchemaError(spec, "not a builtin POVM name and no such file")
    doc = _read_json(path)
    try:
        settings = parse_povm_settings(doc)
    except SchemaError as exc:
        raise SchemaError(f"{path}: {exc.where}", str(exc).split(": ", 1)[1]) from None
    return povm_from_settings(settings, name=path.stem)


def povm_document(settings, angle_unit: str = "radians", label: str = "") -> dict:
    scale = ANGLE_UNITS[angle_unit]
    return {"format": POVM_FORMAT, "version": FORMAT_VERSION, "angle_unit": angle_unit,
            "label": label, "bases": [_angle_entry(s, scale) for s in settings]}


# ---------------------------------------------------------------------------
# state specifications

def parse_state(spec: str) -> np.ndarray:
    """Density matrix from ``werner:p``, ``mixed``, a named state, ``bloch:b1,...,b15``
    or a file (JSON ``{"real": [[..]], "imag": [[..]]}``, a JSON list of rows,
    or whitespace-separated text of real rows)."""
    key, _, arg = spec.partition(":")
    key = key.strip().lower()
    if key == "werner":
        try:
            p = float(arg)
        except ValueError:
            raise ValueError(f"werner state needs a numeric weight, got {arg!r}") from None
        return werner_state(p)
    if key in ("mixed", "maximally-mixed"):
        return maximally_mixed(4)
    if key == "bloch":
        try:
            b = np.array([float(x) for x in arg.replace(",", " ").split()])
        except ValueError:
            raise ValueError("bloch vector must be a list of numbers") from None
        return bloch_to_density(b)
    path = Path(spec)
    if path.exists():
        return _density_file(path)
    return projector(named_state(spec))


def _density_file(path: Path) -> np.ndarray:
    text = path.read_text()
    if path.suffix.lower() == ".json":
        doc = json.loads(text)
        if isinstance(doc, dict):
            if "bloch" in doc:
                return bloch_to_density(np.asarray(doc["bloch"], dtype=float))
            rho = np.asarray(doc["real"], dtype=float) + 1j * np.asarray(doc.get("imag", 0.0), dtype=float)
        else:
            rho = np.asarray(doc, dtype=complex)
    else:
        rho = np.loadtxt(path.open(), dtype=complex, ndmin=2)
    return as_density(rho)
