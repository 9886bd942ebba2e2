"""Tests for eye folding and the centered largest-empty-window metric."""

import numpy as np
import pytest

from eqsi.channel import ChannelConfig, synthesize_pair
from eqsi.errors import MetricUndefined
from eqsi.eye import (
    EyeDiagram,
    EyeWindow,
    fold_eye,
    largest_window,
    mask_cells_empty,
    window_improvement,
    window_is_certified,
)
from eqsi.signal import EyeMask, Segment, extract_segments, label_validity


def brute_window(eye: EyeDiagram) -> EyeWindow:
    """Oracle: enumerate every center-containing empty rectangle.

    Row pairs in Python, column pairs vectorized; no pruning beyond the
    emptiness test itself.  Tie order: area, then width, then earlier t0,
    then lower v0.
    """
    grid = eye.grid
    n_rows, n_cols = grid.shape
    cr, cc = eye.center_row, eye.center_col
    if grid[cr, cc]:
        return EyeWindow(0.0, 0.0, 0.0, 0.0, 0.0)
    colsum = np.cumsum(grid.astype(np.int64), axis=0)
    c1s = np.arange(0, cc + 1)
    c2s = np.arange(cc, n_cols)
    t1s = np.minimum(c2s + 1.0, eye.ui)
    width = t1s[None, :] - c1s[:, None].astype(float)
    best_key, best = None, None
    for r1 in range(cr + 1):
        for r2 in range(cr, n_rows):
            cnt = colsum[r2] - (colsum[r1 - 1] if r1 else 0)
            bad = np.cumsum(cnt != 0)
            span_ok = (bad[c2s][None, :] - np.where(c1s > 0, bad[c1s - 1], 0)[:, None]) == 0
            if not span_ok.any():
                continue
            height = float(r2 - r1 + 1)
            area = np.where(span_ok, width * height, -1.0)
            amax = area.max()
            if amax < 0:
                continue
            tie = area == amax
            wmax = width[tie].max()
            tie &= width == wmax
            i, j = np.argwhere(tie)[0]
            key = (amax, wmax, -int(c1s[i]), -r1)
            if best_key is None or key > best_key:
                best_key = key
                best = EyeWindow(
                    t0=float(c1s[i]),
                    t1=float(t1s[j]),
                    v0=float(eye.v_min + r1),
                    v1=float(eye.v_min + r2 + 1),
                    area=float(amax),
                )
    return best


def dense_raster(seg: Segment, swing: float) -> np.ndarray:
    """Oracle (subset check): fold by dense subsampling of each trace edge.

    Sampling can miss sub-granularity slivers where the line clips a cell
    corner, so this under-approximates the true covered-cell set; use it
    only to assert cells the implementation must not have missed.
    """
    from eqsi.signal import interpolate_samples

    half = int(np.ceil(1.25 * swing))
    n_cols = int(np.ceil(seg.ui))
    step = min(1.0, seg.dt)
    v = interpolate_samples(seg.data, seg.dt, step)
    grid = np.zeros((2 * half, n_cols), dtype=bool)
    for i in range(len(v) - 1):
        n_sub = max(16, int(np.ceil(abs(v[i + 1] - v[i]) * 4)))
        vv = np.linspace(v[i], v[i + 1], n_sub + 1)
        tt = seg.start_ps + (i + np.linspace(0.0, 1.0, n_sub + 1)) * step
        cols = np.minimum(np.floor(np.mod(tt, seg.ui)).astype(int), n_cols - 1)
        rows = np.clip(np.floor(vv).astype(int) + half, 0, 2 * half - 1)
        grid[rows, cols] = True
    if len(v) == 1:
        grid[np.clip(int(np.floor(v[0])) + half, 0, 2 * half - 1), int(np.mod(seg.start_ps, seg.ui))] = True
    return grid


def piecewise_raster(seg: Segment, swing: float) -> np.ndarray:
    """Oracle (exact): scalar piece-walk over fold boundaries per trace edge.

    Each edge is split at integer fold boundaries and at the UI wrap; the
    closed voltage span of each piece is marked in its column.  Same cell
    semantics as the library rasterizer, independently restated.
    """
    from eqsi.signal import interpolate_samples

    half = int(np.ceil(1.25 * swing))
    n_rows, n_cols = 2 * half, int(np.ceil(seg.ui))
    ui = seg.ui
    step = min(1.0, seg.dt)
    v = interpolate_samples(seg.data, seg.dt, step)
    grid = np.zeros((n_rows, n_cols), dtype=bool)

    def mark(col, v1, v2):
        r0 = int(np.clip(np.floor(min(v1, v2)) + half, 0, n_rows - 1))
        r1 = int(np.clip(np.floor(max(v1, v2)) + half, 0, n_rows - 1))
        grid[r0 : r1 + 1, min(col, n_cols - 1)] = True

    fold = np.mod(seg.start_ps + np.arange(len(v)) * step, ui)
    if len(v) == 1:
        mark(int(fold[0]), v[0], v[0])
        return grid
    for i in range(len(v) - 1):
        fa, fb, va, vb = fold[i], fold[i + 1], v[i], v[i + 1]
        denom = (fb - fa) if fb >= fa else (ui - fa) + fb
        # boundaries ahead of fa in unwrapped coordinates, at most two
        cuts = []
        m = float(np.floor(fa)) + 1.0
        end = fa + denom
        if m < min(end, ui):
            cuts.append(m)
        if fb < fa:
            cuts.append(ui)
        pts = [fa] + cuts + [end]
        vals = [va] + [va + (c - fa) / denom * (vb - va) for c in cuts] + [vb]
        for (u1, u2), (v1, v2) in zip(zip(pts, pts[1:]), zip(vals, vals[1:])):
            f1 = u1 - ui if u1 >= ui else u1
            mark(int(np.floor(f1)), v1, v2)
    mark(int(np.floor(fold[-1])), v[-1], v[-1])  # trailing sample's own cell
    return grid


def toy_eye(grid: np.ndarray) -> EyeDiagram:
    return EyeDiagram(grid=grid, v_min=-20, v_max=20, ui=40.0)


class TestFoldEye:
    def test_constant_trace_single_row(self):
        eye = fold_eye(Segment(np.full(1000, 100.0), origin=0))
        rows = np.nonzero(eye.grid.any(axis=1))[0]
        assert list(rows) == [100 - eye.v_min]

    def test_alternating_nrz_matches_dense_oracle(self):
        cfg = ChannelConfig(seed=0, isi_taps=(), lp_pole=None, noise_sigma=0.0, n_bits=20)
        pair = synthesize_pair(cfg)
        bits = np.arange(20) % 2
        sym = bits * 2.0 - 1.0
        k = np.floor(np.arange(len(pair.output)) * cfg.dt / cfg.ui).astype(int)
        seg = Segment(cfg.swing * sym[np.minimum(k, 19)], origin=0)
        eye = fold_eye(seg, swing=cfg.swing)
        assert not eye.grid[eye.center_row, eye.center_col]
        assert eye.grid[400 - eye.v_min].any() and eye.grid[-400 - eye.v_min].any()
        # Dense subsampling is no subset oracle here: the ideal edge slope
        # (80 mV/ps) runs through exact lattice corners, whose cell
        # membership is rounding-dependent.  The piece-walk oracle is.
        np.testing.assert_array_equal(eye.grid, piecewise_raster(seg, cfg.swing))

    def test_noisy_segment_matches_piecewise_oracle(self):
        rng = np.random.default_rng(3)
        seg = Segment(rng.normal(scale=150.0, size=400), origin=7)
        eye = fold_eye(seg, swing=400.0)
        np.testing.assert_array_equal(eye.grid, piecewise_raster(seg, 400.0))
        assert not (dense_raster(seg, 400.0) & ~eye.grid).any()

    def test_random_segments_match_piecewise_oracle(self):
        rng = np.random.default_rng(41)
        for _ in range(8):
            n = int(rng.integers(50, 300))
            dt = float(rng.choice([10.0, 1.0, 0.5]))
            seg = Segment(
                np.cumsum(rng.normal(scale=40.0, size=n)),
                origin=int(rng.integers(0, 200)),
                dt=dt,
                ui=float(rng.choice([156.3, 100.0, 37.7])),
            )
            np.testing.assert_array_equal(
                fold_eye(seg, swing=400.0).grid, piecewise_raster(seg, 400.0)
            )

    def test_single_ui_contiguous_columns(self):
        t = np.arange(16) * 10.0
        seg = Segment(200.0 * np.sin(2 * np.pi * t / 156.3), origin=0)
        eye = fold_eye(seg)
        for c in range(eye.grid.shape[1]):
            rows = np.nonzero(eye.grid[:, c])[0]
            if rows.size:
                assert rows[-1] - rows[0] + 1 == rows.size  # one contiguous pass

    def test_grid_dimensions(self):
        eye = fold_eye(Segment(np.zeros(100), origin=0), swing=400.0)
        assert eye.grid.shape == (1000, 157)
        assert eye.v_min == -500 and eye.v_max == 500


class TestLargestWindow:
    def test_fully_empty(self):
        eye = toy_eye(np.zeros((40, 40), dtype=bool))
        win = largest_window(eye)
        assert win.area == 40.0 * 40.0
        assert (win.t0, win.t1, win.v0, win.v1) == (0.0, 40.0, -20.0, 20.0)

    def test_fully_occupied(self):
        win = largest_window(toy_eye(np.ones((40, 40), dtype=bool)))
        assert win.area == 0.0

    def test_matches_brute_force_on_seeded_grids(self):
        rng = np.random.default_rng(2024)
        for trial in range(100):
            p = rng.uniform(0.03, 0.45)
            grid = rng.random((40, 40)) < p
            if trial % 10 == 0:
                grid[20, 20] = True  # exercise the closed-eye path
            eye = toy_eye(grid)
            got, want = largest_window(eye), brute_window(eye)
            assert got == want, f"trial {trial}: {got} != {want}"

    def test_fractional_ui_clips_last_column(self):
        grid = np.zeros((10, 6), dtype=bool)
        eye = EyeDiagram(grid=grid, v_min=-5, v_max=5, ui=5.7)
        win = largest_window(eye)
        assert win.t1 == pytest.approx(5.7)
        assert win.area == pytest.approx(5.7 * 10)

    def test_certified(self):
        rng = np.random.default_rng(77)
        for _ in range(30):
            grid = rng.random((40, 40)) < 0.3
            eye = toy_eye(grid)
            assert window_is_certified(eye, largest_window(eye))

    def test_monotone_under_added_obstacles(self):
        rng = np.random.default_rng(8)
        grid = rng.random((40, 40)) < 0.1
        eye = toy_eye(grid.copy())
        before = largest_window(eye).area
        empt = np.argwhere(~grid)
        for r, c in empt[rng.choice(len(empt), size=20, replace=False)]:
            grid[r, c] = True
        after = largest_window(toy_eye(grid)).area
        assert after <= before

    def test_clean_eye_regression_floor(self):
        cfg = ChannelConfig(seed=3, isi_taps=(), lp_pole=None, noise_sigma=0.0, n_bits=200)
        pair = synthesize_pair(cfg)
        seg = extract_segments(pair.output, n_x=1000)[0]
        win = largest_window(fold_eye(seg, swing=cfg.swing))
        assert win.area >= 0.5 * 156.3 * 1.5 * 400.0


class TestLabelEyeConsistency:
    def test_label_iff_mask_cells_empty(self):
        mask = EyeMask()
        cfg = ChannelConfig(seed=6, n_bits=2600)
        pair = synthesize_pair(cfg)
        segs = extract_segments(pair.output, n_x=1000, stride=1000)
        assert len(segs) >= 40
        for seg in segs:
            eye = fold_eye(seg, swing=cfg.swing)
            assert label_validity(seg, mask) == int(mask_cells_empty(eye, mask))


class TestWindowImprovement:
    def test_no_change(self):
        assert window_improvement(100.0, 100.0) == 0.0

    def test_fifty_percent(self):
        assert window_improvement(100.0, 150.0) == 50.0

    def test_zero_reference(self):
        with pytest.raises(MetricUndefined):
            window_improvement(0.0, 50.0)
