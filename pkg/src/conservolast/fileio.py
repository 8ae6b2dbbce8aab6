"""On-disk formats: model/tile JSON, sample CSV + sidecar, reports.

Schemas are documented in docs/formats.md and versioned by a "schema"
field.  Floats in CSV are written as %.17g and JSON floats use
shortest-round-trip repr; both reload exactly and rerunning a command
with the same seed reproduces files byte for byte.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .fit import FitReport, TrainingSample
from .kernels import Kernel
from .model import EnergyModel
from .tiles import Tile

MODEL_SCHEMA = "conservolast-model-1"
TILE_SCHEMA = "conservolast-tile-1"
SAMPLES_SCHEMA = "conservolast-samples-1"
REPORT_SCHEMA = "conservolast-report-1"

SAMPLE_COLUMNS = ["E_xx", "E_yy", "E_xy2", "s_1", "s_2", "s_3",
                  "K_11", "K_12", "K_13", "K_22", "K_23", "K_33", "flags"]

_SYM_I = (0, 0, 0, 1, 1, 2)
_SYM_J = (0, 1, 2, 1, 2, 2)


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _pack_sym(mat):
    mat = np.asarray(mat, dtype=float)
    return [float(mat[a, b]) for a, b in zip(_SYM_I, _SYM_J)]


def _unpack_sym(vals):
    out = np.zeros((3, 3))
    for v, a, b in zip(vals, _SYM_I, _SYM_J):
        out[a, b] = v
        out[b, a] = v
    return out


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

def model_to_dict(model: EnergyModel) -> dict:
    return {
        "schema": MODEL_SCHEMA,
        "kernel": {"family": model.kernel.family, "radius": float(model.kernel.radius)},
        "centers": [[float(v) for v in c] for c in model.centers],
        "grad_coeffs": (None if model.grad_coeffs is None else
                        [[float(v) for v in w] for w in model.grad_coeffs]),
        "hess_coeffs": (None if model.hess_coeffs is None else
                        [_pack_sym(w) for w in model.hess_coeffs]),
        "stress_offset": [float(v) for v in model.stress_offset],
        "stiffness_offset": _pack_sym(model.stiffness_offset),
    }


def model_from_dict(data: dict) -> EnergyModel:
    if data.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"not a {MODEL_SCHEMA} file")
    hess = data["hess_coeffs"]
    return EnergyModel(
        kernel=Kernel(data["kernel"]["family"], data["kernel"]["radius"]),
        centers=np.array(data["centers"], dtype=float).reshape(-1, 3),
        grad_coeffs=None if data["grad_coeffs"] is None else np.array(data["grad_coeffs"]),
        hess_coeffs=None if hess is None else np.array([_unpack_sym(h) for h in hess]),
        stress_offset=np.array(data["stress_offset"], dtype=float),
        stiffness_offset=_unpack_sym(data["stiffness_offset"]))


def save_model(path, model: EnergyModel):
    with open(path, "w") as fh:
        fh.write(dumps_json(model_to_dict(model)))


def load_model(path) -> EnergyModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# tile
# ---------------------------------------------------------------------------

def tile_to_dict(tile: Tile) -> dict:
    return {
        "schema": TILE_SCHEMA,
        "period": [float(tile.period[0]), float(tile.period[1])],
        "vertices": [[float(v) for v in row] for row in tile.vertices],
        "triangles": [[int(v) for v in row] for row in tile.triangles],
        "material": {"young": [float(v) for v in tile.young],
                     "poisson": [float(v) for v in tile.poisson]},
        "periodic_pairs": [[int(s), int(m), int(o[0]), int(o[1])]
                           for s, m, o in tile.periodic_pairs],
    }


def tile_from_dict(data: dict) -> Tile:
    if data.get("schema") != TILE_SCHEMA:
        raise ValueError(f"not a {TILE_SCHEMA} file")
    return Tile(
        vertices=np.array(data["vertices"], dtype=float),
        triangles=np.array(data["triangles"], dtype=np.int64),
        young=np.array(data["material"]["young"], dtype=float),
        poisson=np.array(data["material"]["poisson"], dtype=float),
        period=np.array(data["period"], dtype=float),
        periodic_pairs=[(int(s), int(m), (int(ox), int(oy)))
                        for s, m, ox, oy in data["periodic_pairs"]])


def save_tile(path, tile: Tile):
    with open(path, "w") as fh:
        fh.write(dumps_json(tile_to_dict(tile)))


def load_tile(path) -> Tile:
    with open(path) as fh:
        return tile_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# training samples (CSV + JSON sidecar)
# ---------------------------------------------------------------------------

def samples_to_csv(samples) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SAMPLE_COLUMNS)
    for s in samples:
        row = [_fmt(v) for v in s.strain] + [_fmt(v) for v in s.target_stress]
        if s.target_stiffness is not None:
            row += [_fmt(s.target_stiffness[a, b]) for a, b in zip(_SYM_I, _SYM_J)]
        else:
            row += [""] * 6
        row.append(s.flag)
        writer.writerow(row)
    return buf.getvalue()


def samples_from_csv(text: str):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != SAMPLE_COLUMNS:
        raise ValueError("unexpected sample CSV columns")
    samples = []
    for row in reader:
        strain = np.array([float(v) for v in row[0:3]])
        stress = np.array([float(v) for v in row[3:6]])
        if row[6] == "":
            stiff = None
        else:
            stiff = _unpack_sym([float(v) for v in row[6:12]])
        samples.append(TrainingSample(strain=strain, target_stress=stress,
                                      target_stiffness=stiff, flag=row[12]))
    return samples


def save_samples(csv_path, samples, records=None, grid_meta=None, log=None):
    """Writes the CSV plus a JSON sidecar (<csv_path>.meta.json) holding
    per-row protocol metadata and grid information."""
    with open(csv_path, "w") as fh:
        fh.write(samples_to_csv(samples))
    sidecar = {"schema": SAMPLES_SCHEMA,
               "grid": grid_meta or {},
               "rows": records or [],
               "log": log or []}
    with open(str(csv_path) + ".meta.json", "w") as fh:
        fh.write(dumps_json(sidecar))


def load_samples(csv_path):
    """Returns (samples, sidecar dict or None)."""
    with open(csv_path) as fh:
        samples = samples_from_csv(fh.read())
    sidecar = None
    try:
        with open(str(csv_path) + ".meta.json") as fh:
            sidecar = json.load(fh)
    except FileNotFoundError:
        pass
    return samples, sidecar


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def fit_report_to_dict(report: FitReport) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "kind": "fit",
        "stress_error_pct": report.stress_error_pct,
        "stiffness_error_pct": report.stiffness_error_pct,
        "mean_error_pct": report.mean_error_pct,
        "n_rbfs": report.n_rbfs,
        "chosen_radius": report.chosen_radius,
        "condition_estimate": report.condition_estimate,
        "s_rms": report.s_rms,
        "k_rms": report.k_rms,
        "objective": report.objective,
        "sweep": report.sweep,
        "history": report.history,
    }


def save_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))


def per_sample_errors_csv(report: FitReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample", "stress_error_pct", "stiffness_error_pct"])
    for i, row in enumerate(report.per_sample_errors):
        writer.writerow([i, _fmt(row["stress_pct"]), _fmt(row["stiffness_pct"])])
    return buf.getvalue()


def rows_csv(rows, columns) -> str:
    """Generic tidy CSV for report rows (validation tables, sweeps)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        out = []
        for c in columns:
            v = row.get(c, "")
            out.append(_fmt(v) if isinstance(v, float) else v)
        writer.writerow(out)
    return buf.getvalue()
