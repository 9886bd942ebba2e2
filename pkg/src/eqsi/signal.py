"""Waveform containers, segment extraction, folding, and eye-mask labeling.

Voltages are millivolts, times are picoseconds throughout the library.
Folding is always done against the absolute time axis (a segment knows the
source index it was cut from), so every segment of one recording lands on
the same eye phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SegmentationError, SignalError

DEFAULT_UI_PS = 156.3
DEFAULT_DT_PS = 10.0
EYE_GRID_DT_PS = 1.0
DEFAULT_SWING_MV = 400.0


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise SignalError(f"{what} contains NaN/Inf")


@dataclass
class Waveform:
    """A uniformly sampled voltage trace.

    samples: voltages in mV; dt: sample period in ps; ui: unit interval in ps.
    """

    samples: np.ndarray
    dt: float = DEFAULT_DT_PS
    ui: float = DEFAULT_UI_PS

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise SignalError("waveform must be a non-empty 1-D sample vector")
        if self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.ui <= 0:
            raise ParameterError(f"ui must be positive, got {self.ui}")
        _check_finite(self.samples, "waveform")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Time span covered by the sample grid, in ps."""
        return (self.samples.size - 1) * self.dt

    @property
    def start_ps(self) -> float:
        return 0.0


@dataclass
class Segment:
    """A fixed-length slice of a waveform, addressed by its source index."""

    data: np.ndarray
    origin: int
    dt: float = DEFAULT_DT_PS
    ui: float = DEFAULT_UI_PS

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 1 or self.data.size < 1:
            raise SegmentationError("segment must be a non-empty 1-D vector")
        if self.dt <= 0 or self.ui <= 0:
            raise ParameterError("dt and ui must be positive")
        _check_finite(self.data, "segment")

    def __len__(self) -> int:
        return self.data.size

    @property
    def start_ps(self) -> float:
        """Absolute start time on the source waveform's clock."""
        return self.origin * self.dt

    @property
    def samples(self) -> np.ndarray:
        return self.data


@dataclass
class EyeMask:
    """Rectangular keep-out region used to label segments valid/invalid."""

    width: float = 35.0
    height: float = 80.0
    center_t: float = DEFAULT_UI_PS / 2.0
    center_v: float = 0.0

    def __post_init__(self):
        if self.width <= 0:
            raise ParameterError(f"mask width must be positive, got {self.width}")
        if self.height <= 0:
            raise ParameterError(f"mask height must be positive, got {self.height}")

    @property
    def t_lo(self) -> float:
        return self.center_t - self.width / 2.0

    @property
    def t_hi(self) -> float:
        return self.center_t + self.width / 2.0

    @property
    def v_lo(self) -> float:
        return self.center_v - self.height / 2.0

    @property
    def v_hi(self) -> float:
        return self.center_v + self.height / 2.0


def extract_segments(w: Waveform, n_x: int, stride: int = 1) -> list[Segment]:
    """Cut rolling windows of length n_x, advancing by stride samples."""
    if n_x < 1:
        raise ParameterError(f"n_x must be >= 1, got {n_x}")
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    n = len(w)
    if n < n_x:
        raise SegmentationError(f"waveform of {n} samples is shorter than n_x={n_x}")
    count = (n - n_x) // stride + 1
    return [
        Segment(w.samples[k * stride : k * stride + n_x].copy(), origin=k * stride, dt=w.dt, ui=w.ui)
        for k in range(count)
    ]


def interpolate(w: Waveform, target_dt: float) -> Waveform:
    """Resample to a finer grid by linear interpolation; endpoints preserved."""
    if target_dt <= 0:
        raise ParameterError(f"target_dt must be positive, got {target_dt}")
    if target_dt > w.dt:
        raise ParameterError(f"target_dt={target_dt} exceeds source dt={w.dt}; only upsampling is supported")
    if target_dt == w.dt:
        return Waveform(w.samples.copy(), dt=w.dt, ui=w.ui)
    n_out = int(np.floor(w.duration / target_dt + 1e-9)) + 1
    t_src = np.arange(len(w)) * w.dt
    t_new = np.arange(n_out) * target_dt
    return Waveform(np.interp(t_new, t_src, w.samples), dt=target_dt, ui=w.ui)


def interpolate_samples(values: np.ndarray, dt: float, target_dt: float) -> np.ndarray:
    """Array-level variant of `interpolate` for internal callers."""
    if target_dt == dt:
        return np.asarray(values, dtype=np.float64)
    n_out = int(np.floor((len(values) - 1) * dt / target_dt + 1e-9)) + 1
    t_src = np.arange(len(values)) * dt
    return np.interp(np.arange(n_out) * target_dt, t_src, values)


def fold_occupancy(
    values: np.ndarray,
    step: float,
    ui: float,
    t0: float,
    v_min: int,
    n_rows: int,
    n_cols: int,
    clamp: bool = False,
) -> np.ndarray:
    """Rasterize a trace folded at the UI onto a 1 ps x 1 mV boolean grid.

    `values` are voltages spaced `step` ps apart (step must not exceed the
    1 ps column width), starting at absolute time `t0`.  Cells along the
    straight line between consecutive samples are marked too, so fast
    transitions are not aliased through the grid.  `v_min` must be an
    integer so that cell boundaries land on absolute integer millivolts
    for every caller.

    Returns a (n_rows, n_cols) boolean occupancy grid.  With clamp=True
    out-of-range voltages are pinned to the edge rows; otherwise the grid
    must cover the trace.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise SegmentationError("cannot fold an empty trace")
    if step <= 0 or step > EYE_GRID_DT_PS + 1e-12:
        raise ParameterError(f"fold step must be in (0, 1] ps, got {step}")
    if int(v_min) != v_min:
        raise ParameterError("v_min must be an integer millivolt level")

    fold = np.mod(t0 + np.arange(values.size) * step, ui)
    cols = np.floor(fold).astype(np.int64)
    np.clip(cols, 0, n_cols - 1, out=cols)

    # Per-column vertical spans, accumulated via a difference array so a
    # span [r0, r1] costs two scatter-adds regardless of its height.
    diff = np.zeros((n_rows + 1, n_cols), dtype=np.int32)

    def add_spans(span_cols, v_a, v_b):
        lo = np.floor(np.minimum(v_a, v_b)) - v_min
        hi = np.floor(np.maximum(v_a, v_b)) - v_min
        lo = lo.astype(np.int64)
        hi = hi.astype(np.int64)
        if clamp:
            np.clip(lo, 0, n_rows - 1, out=lo)
            np.clip(hi, 0, n_rows - 1, out=hi)
        elif lo.size and (lo.min() < 0 or hi.max() >= n_rows):
            raise ParameterError("trace voltage escapes unclamped fold grid")
        np.add.at(diff, (lo, span_cols), 1)
        np.add.at(diff, (hi + 1, span_cols), -1)

    if values.size == 1:
        add_spans(cols[:1], values[:1], values[:1])
    else:
        fa, fb = fold[:-1], fold[1:]
        ca, cb = cols[:-1], cols[1:]
        va, vb = values[:-1], values[1:]
        wrap = fb < fa
        same = ~wrap & (cb == ca)
        adj = ~wrap & ~same

        add_spans(ca[same], va[same], vb[same])

        if np.any(adj):
            lam = (cb[adj] - fa[adj]) / (fb[adj] - fa[adj])
            vx = va[adj] + lam * (vb[adj] - va[adj])
            add_spans(ca[adj], va[adj], vx)
            add_spans(cb[adj], vx, vb[adj])

        for i in np.nonzero(wrap)[0]:
            dv = vb[i] - va[i]
            span = (ui - fa[i]) + fb[i]
            v_wrap = va[i] + (ui - fa[i]) / span * dv
            boundary = ca[i] + 1
            if boundary < ui:
                vx = va[i] + (boundary - fa[i]) / span * dv
                add_spans(np.array([ca[i]]), np.array([va[i]]), np.array([vx]))
                add_spans(np.array([min(boundary, n_cols - 1)]), np.array([vx]), np.array([v_wrap]))
            else:
                add_spans(np.array([ca[i]]), np.array([va[i]]), np.array([v_wrap]))
            add_spans(cb[i : i + 1], np.array([v_wrap]), vb[i : i + 1])

    return np.cumsum(diff, axis=0)[:n_rows] > 0


def mask_cell_range(mask: EyeMask, ui: float, v_min: int) -> tuple[range, range]:
    """Grid rows/cols whose cell centers fall strictly inside the mask.

    A cell counts as a mask cell only when its center (half-integer mV / ps)
    is inside the open rectangle, so traces exactly on the mask boundary do
    not close the eye.
    """
    if mask.width > ui + 1e-12:
        raise ParameterError(f"mask width {mask.width} exceeds the unit interval {ui}")
    r_lo = int(np.floor(mask.v_lo - v_min - 0.5)) + 1
    r_hi = int(np.ceil(mask.v_hi - v_min - 0.5)) - 1
    c_lo = int(np.floor(mask.t_lo - 0.5)) + 1
    c_hi = int(np.ceil(mask.t_hi - 0.5)) - 1
    return range(r_lo, r_hi + 1), range(c_lo, c_hi + 1)


def label_validity(s: Segment, mask: EyeMask, swing: float = DEFAULT_SWING_MV) -> int:
    """Label a segment 1 (valid) when its folded trace keeps out of the mask.

    The trace is rasterized on the same fixed +-1.25*swing clamped extent
    `eqsi.eye.fold_eye` uses, so the label always agrees with mask-cell
    emptiness of the eye diagram and the grid stays bounded no matter how
    far an equalized trace overshoots.
    """
    half = int(np.ceil(1.25 * swing))
    v_min = -half
    n_rows = 2 * half
    n_cols = int(np.ceil(s.ui))
    step = min(EYE_GRID_DT_PS, s.dt)
    trace = interpolate_samples(s.data, s.dt, step)
    grid = fold_occupancy(trace, step, s.ui, s.start_ps, v_min, n_rows, n_cols, clamp=True)
    rows, cols = mask_cell_range(mask, s.ui, v_min)
    rows = range(max(rows.start, 0), min(rows.stop, n_rows))
    cols = range(max(cols.start, 0), min(cols.stop, n_cols))
    if len(rows) == 0 or len(cols) == 0:
        return 1
    occupied = grid[rows.start : rows.stop, cols.start : cols.stop].any()
    return 0 if occupied else 1


def ui_center_indices(n_samples: int, dt: float, ui: float, t0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Symbols whose UI-center sample falls inside a trace.

    Returns (symbol indices k, sample indices i) with i the sample nearest
    the center time (k + 0.5) * ui.  Centers are tracked on the absolute
    clock so segment phase is preserved.
    """
    t_end = t0 + (n_samples - 1) * dt
    k_first = int(np.ceil((t0 / ui) - 0.5))
    k_last = int(np.floor((t_end / ui) - 0.5))
    if k_last < k_first:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    ks = np.arange(k_first, k_last + 1, dtype=np.int64)
    idx = np.rint(((ks + 0.5) * ui - t0) / dt).astype(np.int64)
    keep = (idx >= 0) & (idx < n_samples)
    return ks[keep], idx[keep]
