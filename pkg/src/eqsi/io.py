"""Deterministic artifact readers and writers: JSON, CSV, SVG.

Every file written here must be byte-identical when the producing
command is re-run with the same config and seed.  That rule shapes the
formats: floats are serialized with repr (the shortest round-trip
form), JSON keys are sorted, line endings are always "\\n", and nothing
derived from the wall clock may enter the payload.  Measured durations
go into *.timing.json sidecars written by `write_timing`, which are the
one documented exception to the guarantee.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .errors import DataError
from .signal import DEFAULT_UI_PS, Waveform
from .version import __version__


def _to_jsonable(obj):
    """Recursively convert numpy scalars/arrays; reject non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if not np.isfinite(f):
            raise DataError(f"refusing to serialize non-finite value {f!r}")
        return f
    if obj is None or isinstance(obj, str):
        return obj
    raise DataError(f"cannot serialize object of type {type(obj).__name__}")


def canonical_json(obj) -> str:
    return json.dumps(_to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def config_hash(obj) -> str:
    """Short stable digest of any JSON-serializable configuration."""
    compact = json.dumps(_to_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(compact.encode("utf-8")).hexdigest()[:12]


def stamp(cfg_hash: str, seed: int) -> dict:
    """Provenance block embedded in every artifact."""
    return {"config_hash": cfg_hash, "seed": int(seed), "version": __version__}


def write_json(path: str, obj) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(canonical_json(obj))


def read_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def write_timing(path: str, durations: dict) -> None:
    """Wall-clock sidecar; exempt from the byte-identity guarantee."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps({k: float(v) for k, v in durations.items()}, indent=2, sort_keys=True) + "\n")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if not np.isfinite(f):
            raise DataError(f"refusing to serialize non-finite value {f!r}")
        return repr(f)
    s = str(value)
    if "," in s or "\n" in s:
        raise DataError(f"CSV cell may not contain commas or newlines: {s!r}")
    return s


def write_csv(path: str, header: list[str], rows) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"empty CSV file: {path}")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:] if line]


def waveform_to_csv(path: str, w: Waveform) -> None:
    """Header `t_ps,v_mV`, one row per sample, monotone t."""
    rows = ((k * w.dt, float(v)) for k, v in enumerate(w.samples))
    write_csv(path, ["t_ps", "v_mV"], rows)


def waveform_from_csv(path: str, ui: float = DEFAULT_UI_PS) -> Waveform:
    header, rows = read_csv(path)
    if header != ["t_ps", "v_mV"]:
        raise DataError(f"unexpected waveform CSV header: {header}")
    if len(rows) < 2:
        raise DataError("waveform CSV needs at least two samples")
    t = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) for r in rows])
    dt = float(t[1] - t[0])
    if dt <= 0 or not np.allclose(np.diff(t), dt, rtol=0, atol=1e-9):
        raise DataError("waveform CSV time axis must be uniform and increasing")
    return Waveform(v, dt=dt, ui=ui)


def latents_to_csv(path: str, origins, labels, z: np.ndarray) -> None:
    """Rows (segment origin, y, z1..zl) for external embedding plots."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if not (len(origins) == len(labels) == z.shape[0]):
        raise DataError("origins, labels, and latents must align row-wise")
    header = ["origin", "y"] + [f"z{i + 1}" for i in range(z.shape[1])]
    rows = ((int(o), int(y), *map(float, zrow)) for o, y, zrow in zip(origins, labels, z))
    write_csv(path, header, rows)


def eye_to_csv(path: str, eye) -> None:
    """Occupancy grid; first column is the voltage bin floor in mV."""
    header = ["v_mV"] + [str(c) for c in range(eye.grid.shape[1])]
    rows = ((eye.v_min + r, *eye.grid[r].astype(int)) for r in range(eye.grid.shape[0]))
    write_csv(path, header, rows)


def _svg_rect(x, y, w, h, style: str) -> str:
    return f'<rect x="{x:g}" y="{y:g}" width="{w:g}" height="{h:g}" {style}/>'


def eye_to_svg(path: str, eye, window=None, mask=None, note: str | None = None) -> None:
    """Render the eye grid with the found window and mask outlined.

    Occupied cells are merged into horizontal runs to keep the file
    small.  `note` (e.g. a timestamp) is embedded as a comment only when
    given; default artifacts stay reproducible.
    """
    n_rows, n_cols = eye.grid.shape
    to_y = lambda v: n_rows - (v - eye.v_min)  # mV -> svg y (flipped)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {n_cols} {n_rows}" '
        f'width="{4 * n_cols}" height="{n_rows}" preserveAspectRatio="none">',
    ]
    if note is not None:
        safe = note.replace("--", "- -")
        parts.append(f"<!-- {safe} -->")
    parts.append(_svg_rect(0, 0, n_cols, n_rows, 'fill="#ffffff"'))
    for r in range(n_rows):
        row = eye.grid[r]
        if not row.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate(([0], row, [0]))))
        for c0, c1 in zip(edges[::2], edges[1::2]):
            parts.append(_svg_rect(int(c0), to_y(eye.v_min + r + 1), int(c1 - c0), 1, 'fill="#1a1a66"'))
    if mask is not None:
        t0 = mask.center_t - mask.width / 2.0
        parts.append(
            _svg_rect(
                t0,
                to_y(mask.center_v + mask.height / 2.0),
                mask.width,
                mask.height,
                'fill="none" stroke="#cc2222" stroke-width="1"',
            )
        )
    if window is not None and window.area > 0:
        parts.append(
            _svg_rect(
                window.t0,
                to_y(window.v1),
                window.width,
                window.height,
                'fill="none" stroke="#22aa22" stroke-width="1"',
            )
        )
    parts.append("</svg>")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
