"""On-disk formats: datasets, reports, frame matrices, immersion tables.

Every format is either JSON (datasets, reports, frames, diagnostics) or CSV
(immersion point sets). Floats are serialized as shortest round-trip
decimals, so write -> parse is bit-exact; every writer here has a matching
parser.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .bundle_data import GeometricData, load_data
from .errors import SchemaError
from .immersion import ImmersionField
from .verifier import ResidualReport


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def _write_json(doc, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_dataset(path, validate=True) -> GeometricData:
    return load_data(_read_json(path), validate=validate)


def save_dataset(data: GeometricData, path):
    _write_json(data.to_document(), path)


def save_report(report: ResidualReport, path, meta=None):
    doc = {"format_version": 1, "kind": "warpframe.report"}
    doc.update(report.to_dict())
    if meta:
        doc["meta"] = meta
    _write_json(doc, path)


def load_report(path) -> ResidualReport:
    doc = _read_json(path)
    if doc.get("kind") != "warpframe.report":
        raise SchemaError(f"{path}: not a warpframe.report document")
    return ResidualReport.from_dict(doc)


def save_frame_matrix(B, path, node=None):
    B = np.asarray(getattr(B, "B", B), dtype=float)
    doc = {"format_version": 1, "kind": "warpframe.frame",
           "shape": list(B.shape), "matrix": B.ravel().tolist()}
    if node is not None:
        doc["node"] = list(node)
    _write_json(doc, path)


def load_frame_matrix(path):
    doc = _read_json(path)
    if doc.get("kind") != "warpframe.frame":
        raise SchemaError(f"{path}: not a warpframe.frame document")
    try:
        shape = tuple(doc["shape"])
        mat = np.asarray(doc["matrix"], dtype=float).reshape(shape)
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed frame document") from exc
    return mat


def save_diagnostics(diag: dict, path):
    doc = {"format_version": 1, "kind": "warpframe.diagnostics"}
    doc.update({k: (list(v) if isinstance(v, tuple) else v)
                for k, v in diag.items()})
    _write_json(doc, path)


def write_immersion_csv(imm: ImmersionField, path):
    """Point set as CSV: node multi-index, spatial coordinates, height."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = imm.grid.n
    d = imm.spatial.shape[-1]
    header = [f"i{k}" for k in range(n)] + [f"f{g}" for g in range(d)] + ["t"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for idx in np.ndindex(*imm.grid.extents):
            row = [str(i) for i in idx]
            row += [repr(float(v)) for v in imm.spatial[idx]]
            row.append(repr(float(imm.t[idx])))
            wr.writerow(row)


def read_immersion_csv(path):
    """Parse an immersion CSV back into (indices, spatial, t)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        n = sum(1 for h in header if h.startswith("i"))
        d = sum(1 for h in header if h.startswith("f"))
        if header != [f"i{k}" for k in range(n)] + \
                [f"f{g}" for g in range(d)] + ["t"]:
            raise SchemaError(f"{path}: unexpected immersion CSV header")
        idx, spatial, t = [], [], []
        for row in rd:
            idx.append([int(v) for v in row[:n]])
            spatial.append([float(v) for v in row[n:n + d]])
            t.append(float(row[n + d]))
    return (np.asarray(idx, dtype=int), np.asarray(spatial, dtype=float),
            np.asarray(t, dtype=float))


def save_frames_json(imm: ImmersionField, path):
    if imm.frames is None:
        raise ValueError("immersion field carries no frames")
    doc = {"format_version": 1, "kind": "warpframe.adapted_frames",
           "grid": imm.grid.to_dict(),
           "shape": list(imm.frames.shape),
           "frames": imm.frames.ravel().tolist()}
    _write_json(doc, path)


def load_frames_json(path):
    doc = _read_json(path)
    if doc.get("kind") != "warpframe.adapted_frames":
        raise SchemaError(f"{path}: not a warpframe.adapted_frames document")
    return np.asarray(doc["frames"], dtype=float).reshape(tuple(doc["shape"]))
