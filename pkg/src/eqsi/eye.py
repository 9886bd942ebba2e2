"""Eye diagrams and the largest centered eye-opening window.

The eye grid is 1 ps by 1 mV.  The opening metric is the maximal-area
axis-aligned empty rectangle that contains the eye center cell; its area
is in mV*ps.  Ties go to the wider rectangle, then the earlier time
bound, then the lower voltage bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MetricUndefined, SegmentationError
from .signal import (
    DEFAULT_SWING_MV,
    EYE_GRID_DT_PS,
    Segment,
    fold_occupancy,
    interpolate_samples,
    mask_cell_range,
)


@dataclass
class EyeDiagram:
    """Folded occupancy grid: rows are 1 mV voltage bins, cols 1 ps time bins."""

    grid: np.ndarray
    v_min: int
    v_max: int
    ui: float

    def __post_init__(self):
        if self.grid.ndim != 2:
            raise SegmentationError("eye grid must be 2-D")
        expect = (int(np.ceil(self.v_max - self.v_min)), int(np.ceil(self.ui)))
        if self.grid.shape != expect:
            raise SegmentationError(f"eye grid shape {self.grid.shape} != {expect}")

    @property
    def center_row(self) -> int:
        return int(np.floor(0.0 - self.v_min))

    @property
    def center_col(self) -> int:
        return int(np.floor(self.ui / 2.0))


@dataclass
class EyeWindow:
    """An empty rectangle in the eye; degenerate (area 0) means a closed eye."""

    t0: float
    t1: float
    v0: float
    v1: float
    area: float

    @property
    def width(self) -> float:
        return self.t1 - self.t0

    @property
    def height(self) -> float:
        return self.v1 - self.v0


def fold_eye(s: Segment, swing: float = DEFAULT_SWING_MV) -> EyeDiagram:
    """Fold a segment into an eye on a fixed voltage extent of +-1.25*swing.

    The trace is interpolated to the 1 ps grid and cells along the line
    between consecutive points are marked, so fast edges stay visible.
    Voltages beyond the extent are pinned to the edge rows.
    """
    if swing <= 0:
        raise SegmentationError(f"swing must be positive, got {swing}")
    half = int(np.ceil(1.25 * swing))
    v_min, v_max = -half, half
    n_cols = int(np.ceil(s.ui))
    step = min(EYE_GRID_DT_PS, s.dt)
    trace = interpolate_samples(s.data, s.dt, step)
    grid = fold_occupancy(trace, step, s.ui, s.start_ps, v_min, v_max - v_min, n_cols, clamp=True)
    return EyeDiagram(grid=grid, v_min=v_min, v_max=v_max, ui=s.ui)


def _degenerate() -> EyeWindow:
    return EyeWindow(t0=0.0, t1=0.0, v0=0.0, v1=0.0, area=0.0)


def largest_window(eye: EyeDiagram) -> EyeWindow:
    """Largest empty axis-aligned rectangle containing the eye center cell.

    Works on column spans: for every span [c1, c2] through the center
    column, the tallest empty rectangle is found from per-column runs of
    empty cells around the center row; any shorter rectangle of the same
    span has strictly smaller area, so scoring the per-span tallest
    candidates by (area, width, earlier t0) finds the global winner.
    """
    grid = eye.grid
    n_rows, n_cols = grid.shape
    cr, cc = eye.center_row, eye.center_col
    if grid[cr, cc]:
        return _degenerate()

    # Per-column contiguous empty run through the center row.
    below = grid[: cr + 1][::-1]
    hit = below.any(axis=0)
    first = below.argmax(axis=0)
    run_down = np.where(hit, first, cr + 1)
    above = grid[cr:]
    hit = above.any(axis=0)
    first = above.argmax(axis=0)
    run_up = np.where(hit, first, n_rows - cr)
    bot = cr - run_down + 1
    top = cr + run_up - 1

    # Columns reachable from the center along the empty center row.
    row = grid[cr]
    occ_left = np.nonzero(row[:cc])[0]
    c_lo = int(occ_left[-1]) + 1 if occ_left.size else 0
    occ_right = np.nonzero(row[cc + 1 :])[0]
    c_hi = cc + 1 + int(occ_right[0]) - 1 if occ_right.size else n_cols - 1

    c1s = np.arange(c_lo, cc + 1)
    c2s = np.arange(cc, c_hi + 1)
    # Running extremes of the per-column runs, out from the center column.
    bot_l = np.maximum.accumulate(bot[c1s[::-1]])[::-1]
    top_l = np.minimum.accumulate(top[c1s[::-1]])[::-1]
    bot_r = np.maximum.accumulate(bot[c2s])
    top_r = np.minimum.accumulate(top[c2s])

    lo = np.maximum.outer(bot_l, bot_r)
    hi = np.minimum.outer(top_l, top_r)
    height = hi - lo + 1
    t1 = np.minimum(c2s + 1.0, eye.ui)
    width = t1[None, :] - c1s[:, None].astype(np.float64)
    area = width * height

    best = area.max()
    tie = area == best
    w_best = width[tie].max()
    tie &= width == w_best
    i, j = np.argwhere(tie)[0]  # rows scan c1 ascending: earliest t0 wins

    c1 = int(c1s[i])
    r_lo, r_hi = int(lo[i, j]), int(hi[i, j])
    return EyeWindow(
        t0=float(c1),
        t1=float(t1[j]),
        v0=float(eye.v_min + r_lo),
        v1=float(eye.v_min + r_hi + 1),
        area=float(area[i, j]),
    )


def window_is_certified(eye: EyeDiagram, win: EyeWindow) -> bool:
    """Check the window's cells are empty and contain the eye center."""
    if win.area == 0.0:
        return True
    r0 = int(round(win.v0 - eye.v_min))
    r1 = int(round(win.v1 - eye.v_min))
    c0 = int(round(win.t0))
    c1 = int(np.ceil(win.t1 - 1e-9))
    if not (r0 <= eye.center_row < r1 and c0 <= eye.center_col < c1):
        return False
    return not eye.grid[r0:r1, c0:c1].any()


def mask_cells_empty(eye: EyeDiagram, mask) -> bool:
    """True when no folded trace cell lies in the mask rectangle's cells."""
    rows, cols = mask_cell_range(mask, eye.ui, eye.v_min)
    r0, r1 = max(rows.start, 0), min(rows.stop, eye.grid.shape[0])
    c0, c1 = max(cols.start, 0), min(cols.stop, eye.grid.shape[1])
    if r0 >= r1 or c0 >= c1:
        return True
    return not eye.grid[r0:r1, c0:c1].any()


def window_improvement(before: float, after: float) -> float:
    """Percent change of window area relative to the starting area."""
    if before <= 0:
        raise MetricUndefined(f"reference window area must be positive, got {before}")
    return 100.0 * (after - before) / before
