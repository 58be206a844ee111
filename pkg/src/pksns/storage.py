"""
On-disk formats: diagnostics CSV, run summary JSON and binary checkpoints.

Checkpoint layout (all little-endian)::

    uint32     header length in bytes
    bytes      UTF-8 JSON header (sorted keys)
    complex128 N coefficients, C order, shape (Nx, Ny)
    complex128 Omega coefficients, same shape

The header carries the grid, the physical parameters, t, step and output
counters, the running integrals and the blowup history, so a run can be
continued bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .dynamics import BlowupHistory, BlowupVerdict, PhysParams, ResumePoint, SimState
from .spectral import Grid, SpectralField, make_grid

__all__ = [
    "CSV_SCHEMA_VERSION",
    "CHECKPOINT_VERSION",
    "CheckpointError",
    "CsvWriter",
    "read_csv",
    "records_from_csv",
    "write_checkpoint",
    "read_checkpoint",
    "write_json",
]

CSV_SCHEMA_VERSION = 1
CHECKPOINT_VERSION = 1
_DTYPE = "<c16"


class CheckpointError(ValueError):
    pass


class CsvWriter:
    """Appends diagnostics rows; the header is written once."""

    def __init__(self, path: Path, append: bool = False):
        self.path = Path(path)
        if not append:
            with open(self.path, "w", newline="") as fh:
                fh.write(",".join(diag.CSV_COLUMNS) + "\n")

    def write(self, record: diag.DiagnosticsRecord) -> None:
        with open(self.path, "a", newline="") as fh:
            fh.write(",".join(record.row()) + "\n")


def read_csv(path: Path) -> dict[str, np.ndarray]:
    """Columns of a diagnostics CSV as float arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}


def records_from_csv(path: Path, count: int) -> list[diag.DiagnosticsRecord]:
    """The first ``count`` rows as records (floats round-trip exactly through repr)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if header != diag.CSV_COLUMNS:
        raise CheckpointError(f"{path}: column layout does not match this version")
    if len(rows) - 1 < count:
        raise CheckpointError(f"{path}: has {len(rows) - 1} rows, checkpoint needs {count}")
    out = []
    for r in rows[1 : count + 1]:
        vals = {k: (int(v) if k == "steps" else float(v)) for k, v in zip(header, r)}
        out.append(diag.DiagnosticsRecord(**vals))
    return out


def truncate_csv(path: Path, count: int) -> None:
    """Keep the header and the first ``count`` data rows."""
    with open(path, newline="") as fh:
        lines = fh.readlines()
    with open(path, "w", newline="") as fh:
        fh.writelines(lines[: count + 1])


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def verdict_to_dict(v: BlowupVerdict) -> dict:
    return {"status": v.status, "t_stop": v.t_stop, "peak_sup": v.peak_sup,
            "tail_fraction": v.tail_fraction, "triggers": list(v.triggers)}


def verdict_from_dict(d: dict) -> BlowupVerdict:
    return BlowupVerdict(d["status"], d["t_stop"], d["peak_sup"], d["tail_fraction"], tuple(d["triggers"]))


def write_checkpoint(path: Path, point: ResumePoint) -> None:
    st = point.state
    g = st.grid
    header = {
        "format_version": CHECKPOINT_VERSION,
        "dtype": _DTYPE,
        "grid": g.to_dict(),
        "frame": st.frame,
        "params": st.params.to_dict(),
        "t": st.t,
        "steps": point.steps,
        "out_index": point.out_index,
        "accumulators": point.acc.to_dict(),
        "history": {"initial_sup": point.history.initial_sup, "peak_sup": point.history.peak_sup},
        "pending_leak": verdict_to_dict(point.pending_leak) if point.pending_leak else None,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(st.N.coeffs, dtype=_DTYPE).tobytes())
        fh.write(np.ascontiguousarray(st.Omega.coeffs, dtype=_DTYPE).tobytes())
    tmp.replace(path)


def read_checkpoint(path: Path) -> tuple[dict, SimState, diag.Accumulators, BlowupHistory]:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise CheckpointError(f"{path}: truncated")
    (n,) = struct.unpack("<I", data[:4])
    header = json.loads(data[4 : 4 + n])
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    gd = header["grid"]
    g: Grid = make_grid(gd["Nx"], gd["Ny"], gd["Ly"])
    size = g.Nx * g.Ny * 16
    body = data[4 + n :]
    if len(body) != 2 * size:
        raise CheckpointError(f"{path}: expected {2 * size} payload bytes, found {len(body)}")
    N = np.frombuffer(body[:size], dtype=_DTYPE).reshape(g.Nx, g.Ny).astype(complex)
    W = np.frombuffer(body[size:], dtype=_DTYPE).reshape(g.Nx, g.Ny).astype(complex)
    t = header["t"]
    params = PhysParams(**header["params"])
    state = SimState(SpectralField(g, N, header["frame"], t), SpectralField(g, W, header["frame"], t), t, params)
    acc = diag.Accumulators(**header["accumulators"])
    hist = BlowupHistory(**header["history"])
    return header, state, acc, hist
