"""On-disk formats: diagnostics streams, field snapshots and checkpoints.

Diagnostics stream
    One JSON object per line, keys in a fixed order, flushed after every
    record so an interrupted run leaves a valid prefix.

Snapshot
    ``<stem>.bin`` holds raw little-endian float64 arrays concatenated in the
    order listed by the sidecar ``<stem>.json``, which also records shapes
    and metadata.

Checkpoint
    A single file: one line of JSON header terminated by ``\\n`` followed by
    raw little-endian float64 data in the order ``h``, the velocity
    components, then ``w`` when present. The header records the grid, the
    parameters, the time and the field layout.
"""
import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .grid import Grid
from .state import HydroState, NonHydroState, Params

__all__ = [
    "clean_json",
    "dumps",
    "JsonlWriter",
    "read_jsonl",
    "write_snapshot",
    "read_snapshot",
    "write_checkpoint",
    "read_checkpoint",
    "write_report",
]

CHECKPOINT_MAGIC = "isoflow-checkpoint"
_LE = "<f8"


def clean_json(obj):
    """Recursively convert numpy scalars and map non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {k: clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj, **kw):
    return json.dumps(clean_json(obj), allow_nan=False, **kw)


class JsonlWriter:
    """Append-only JSON-lines writer.

    Parameters
    ----------
    path : path-like
        Target file; truncated on open.
    extra : dict, optional
        Keys prepended to every record when absent (e.g. the config hash).
    """

    def __init__(self, path, extra=None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.extra = dict(extra or {})
        self._fh = open(self.path, "w", encoding="utf-8")

    def __call__(self, record):
        rec = dict(record)
        if self.extra:
            head = {k: v for k, v in self.extra.items() if k not in rec}
            if head:
                # 'kind' stays first, the extra keys follow it
                kind = {"kind": rec.pop("kind")} if "kind" in rec else {}
                rec = {**kind, **head, **rec}
        self._fh.write(dumps(rec) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_report(path, report):
    """Write a JSON document with stable formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report, indent=2) + "\n", encoding="utf-8")


def write_snapshot(stem, arrays, meta=None):
    """Write named arrays to ``stem.bin`` with a ``stem.json`` sidecar."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    layout = []
    with open(stem.with_suffix(".bin"), "wb") as fh:
        for name, arr in arrays.items():
            a = np.ascontiguousarray(arr, dtype=_LE)
            layout.append({"name": name, "shape": list(a.shape)})
            fh.write(a.tobytes())
    header = {"format": "isoflow-snapshot", "dtype": _LE, "fields": layout, "meta": meta or {}}
    stem.with_suffix(".json").write_text(dumps(header, indent=2) + "\n", encoding="utf-8")


def read_snapshot(stem):
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    raw = stem.with_suffix(".bin").read_bytes()
    out, offset = {}, 0
    for item in header["fields"]:
        n = int(np.prod(item["shape"], dtype=int))
        out[item["name"]] = np.frombuffer(raw, dtype=_LE, count=n, offset=offset).reshape(item["shape"])
        offset += 8 * n
    return out, header["meta"]


def _grid_dict(grid):
    return dataclasses.asdict(grid)


def write_checkpoint(path, state, grid, params):
    """Serialize ``state`` with its grid and parameters."""
    names = ["h"] + [f"u{i}" for i in range(grid.d)]
    arrays = [state.h] + list(state.u)
    if isinstance(state, NonHydroState):
        names.append("w")
        arrays.append(state.w)
    header = {
        "format": CHECKPOINT_MAGIC,
        "version": 1,
        "kind": "nonhydro" if isinstance(state, NonHydroState) else "hydro",
        "t": float(state.t),
        "grid": _grid_dict(grid),
        "params": dataclasses.asdict(params),
        "fields": names,
        "shape": list(grid.shape),
        "dtype": _LE,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype=_LE).tobytes())


def read_checkpoint(path):
    """Inverse of :func:`write_checkpoint`; returns ``(state, grid, params)``."""
    data = Path(path).read_bytes()
    nl = data.index(b"\n")
    header = json.loads(data[:nl].decode("utf-8"))
    if header.get("format") != CHECKPOINT_MAGIC:
        raise ValueError("not a checkpoint file")
    grid = Grid(**header["grid"])
    params = Params().with_(**header["params"])
    shape = tuple(header["shape"])
    n = int(np.prod(shape))
    flat = np.frombuffer(data, dtype=_LE, offset=nl + 1)
    if flat.size != n * len(header["fields"]):
        raise ValueError("checkpoint payload has the wrong length")
    fields = [flat[i * n:(i + 1) * n].reshape(shape).copy() for i in range(len(header["fields"]))]
    h, u = fields[0], np.stack(fields[1:1 + grid.d])
    if header["kind"] == "nonhydro":
        return NonHydroState(header["t"], h, u, fields[-1]), grid, params
    return HydroState(header["t"], h, u), grid, params
