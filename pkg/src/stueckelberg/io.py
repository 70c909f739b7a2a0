"""Reading and writing :class:`ScanResult` files.

CSV holds the numbers only: a header row, then one row per point. Maps are
written in long form, ordered lexicographically by ``(axis1, axis2)``. If
the metadata carries the run configuration it is written next to the CSV
as ``<file>.cfg``. JSON holds everything, metadata included.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import re

import numpy as np

from .results import Axis, ScanResult

FORMATS = ("csv", "json")
_LABEL = re.compile(r"^(?P<name>.*?) \[(?P<unit>[^\]]*)\]$")


def _num(x):
    return repr(float(x))


def _split_label(label):
    m = _LABEL.match(label)
    if not m:
        raise ValueError(f"column header {label!r} is not of the form 'name [unit]'")
    return m["name"], m["unit"]


def scan_to_csv(result: ScanResult) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    value_label = f"{result.value_name} [{result.value_unit}]"
    header = [result.axis1.label] + ([result.axis2.label] if result.is_map else []) + [value_label]
    if result.uncertainty is not None:
        header.append(f"uncertainty [{result.value_unit}]")
    w.writerow(header)
    unc = result.uncertainty
    if result.is_map:
        for i, a in enumerate(result.axis1.values):
            for j, b in enumerate(result.axis2.values):
                row = [_num(a), _num(b), _num(result.values[i, j])]
                if unc is not None:
                    row.append(_num(unc[i, j]))
                w.writerow(row)
    else:
        for i, a in enumerate(result.axis1.values):
            row = [_num(a), _num(result.values[i])]
            if unc is not None:
                row.append(_num(unc[i]))
            w.writerow(row)
    return buf.getvalue()


def scan_from_csv(text: str) -> ScanResult:
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    header, body = rows[0], rows[1:]
    has_unc = header[-1].startswith("uncertainty [")
    n_axes = len(header) - 1 - has_unc
    if n_axes not in (1, 2):
        raise ValueError(f"unexpected CSV header {header}")
    data = np.array([[float(x) for x in r] for r in body], dtype=float).reshape(len(body), len(header))
    vname, vunit = _split_label(header[n_axes])
    n1, u1 = _split_label(header[0])
    if n_axes == 1:
        ax1 = Axis(n1, u1, data[:, 0])
        return ScanResult(ax1, data[:, 1], None, vname, vunit, {}, data[:, 2] if has_unc else None)
    n2, u2 = _split_label(header[1])
    a1 = np.unique(data[:, 0])
    a2 = np.unique(data[:, 1])
    if a1.size * a2.size != data.shape[0]:
        raise ValueError("map CSV is not a complete rectangular grid")
    shape = (a1.size, a2.size)
    # rows are in (axis1, axis2) order, so the axes are the first column run and first row run
    ax1 = Axis(n1, u1, data[:: a2.size, 0])
    ax2 = Axis(n2, u2, data[: a2.size, 1])
    unc = data[:, 3].reshape(shape) if has_unc else None
    return ScanResult(ax1, data[:, 2].reshape(shape), ax2, vname, vunit, {}, unc)


def _axis_dict(ax: Axis | None):
    if ax is None:
        return None
    return {"name": ax.name, "unit": ax.unit, "values": ax.values.tolist()}


def _jsonable(obj):
    """Replace numpy scalars and tuples so the metadata survives a round trip."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def scan_to_json(result: ScanResult) -> str:
    doc = {
        "axis1": _axis_dict(result.axis1),
        "axis2": _axis_dict(result.axis2),
        "value_name": result.value_name,
        "value_unit": result.value_unit,
        "values": result.values.tolist(),
        "uncertainty": None if result.uncertainty is None else result.uncertainty.tolist(),
        "metadata": _jsonable(result.metadata),
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def scan_from_json(text: str) -> ScanResult:
    doc = json.loads(text)

    def axis(d):
        return None if d is None else Axis(d["name"], d["unit"], np.array(d["values"], dtype=float))

    unc = doc.get("uncertainty")
    return ScanResult(
        axis(doc["axis1"]),
        np.array(doc["values"], dtype=float),
        axis(doc.get("axis2")),
        doc["value_name"],
        doc["value_unit"],
        doc.get("metadata", {}),
        None if unc is None else np.array(unc, dtype=float),
    )


def guess_format(path, fmt=None):
    if fmt is not None:
        if fmt not in FORMATS:
            raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        return fmt
    ext = os.path.splitext(str(path))[1].lower().lstrip(".")
    return ext if ext in FORMATS else "csv"


def sidecar_path(path):
    return f"{path}.cfg"


def write_scan(result: ScanResult, path, fmt=None):
    """Write ``result``; returns the list of files written."""
    fmt = guess_format(path, fmt)
    text = scan_to_csv(result) if fmt == "csv" else scan_to_json(result)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    written = [str(path)]
    cfg = result.metadata.get("config")
    if fmt == "csv" and cfg:
        with open(sidecar_path(path), "w", encoding="utf-8", newline="") as fh:
            fh.write(cfg)
        written.append(sidecar_path(path))
    return written


def read_scan(path, fmt=None) -> ScanResult:
    """Read a scan written by :func:`write_scan`.

    A CSV sidecar, if present, is returned as ``metadata["config"]``.
    """
    fmt = guess_format(path, fmt)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "json":
        return scan_from_json(text)
    result = scan_from_csv(text)
    side = sidecar_path(path)
    if os.path.exists(side):
        with open(side, encoding="utf-8") as fh:
            result.metadata["config"] = fh.read()
    return result


def dumps_mapping(doc: dict) -> str:
    """Deterministic JSON for small result dictionaries (fit reports)."""
    return json.dumps(_jsonable(doc), indent=1, sort_keys=True, allow_nan=True) + "\n"

