"""DFE and CTLE equalizers, their cascade, and the action-box mapping.

Optimizers work in the normalized box [0,1]^d; `ParamRanges` carries the
affine map to physical units.  d=4 drives a 4-tap DFE, d=8 a CTLE (four
parameters) followed by the DFE.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import ParameterError, ShapeError, SignalError
from .signal import Segment, Waveform, ui_center_indices

FREQ_FLOOR_GHZ = 1e-3  # 1 MHz: keeps the bilinear zero/pole away from s=0

DFE_TAP_COUNT = 4


@dataclass
class DfeParams:
    """Feedback tap weights; values land in [0,1] (clipped, flagged)."""

    taps: tuple[float, ...]
    clipped: bool = field(default=False, compare=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.shape != (DFE_TAP_COUNT,):
            raise ShapeError(f"expected {DFE_TAP_COUNT} taps, got shape {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ParameterError("taps must be finite")
        cl = np.clip(taps, 0.0, 1.0)
        self.clipped = bool(np.any(cl != taps))
        self.taps = tuple(float(t) for t in cl)


@dataclass
class CtleParams:
    """One-zero one-pole peaking filter parameters (GHz / dB)."""

    g_dc: float
    f_z: float
    f_p: float
    g_p: float
    clipped: bool = field(default=False, compare=False)

    RANGES = ((0.0, 10.0), (0.0, 1.0), (0.0, 10.0), (0.0, 20.0))

    def __post_init__(self):
        vals = np.array([self.g_dc, self.f_z, self.f_p, self.g_p], dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise ParameterError("CTLE parameters must be finite")
        lo = np.array([r[0] for r in self.RANGES])
        hi = np.array([r[1] for r in self.RANGES])
        cl = np.clip(vals, lo, hi)
        self.clipped = bool(np.any(cl != vals))
        self.g_dc, self.f_z, self.f_p, self.g_p = (float(v) for v in cl)


@dataclass
class ActionVector:
    """Normalized optimizer action; components clipped into [0,1]."""

    a: np.ndarray
    clipped: bool = field(default=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 1 or a.size == 0:
            raise ShapeError(f"action must be a non-empty vector, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("action must be finite")
        cl = np.clip(a, 0.0, 1.0)
        self.clipped = bool(np.any(cl != a))
        self.a = cl

    @property
    def d(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class ParamRanges:
    """Per-dimension physical bounds of the optimizer box."""

    low: tuple[float, ...]
    high: tuple[float, ...]

    def __post_init__(self):
        if len(self.low) != len(self.high):
            raise ShapeError("low/high length mismatch")
        if not all(l < h for l, h in zip(self.low, self.high)):
            raise ParameterError("every range must satisfy low < high")
        object.__setattr__(self, "low", tuple(float(x) for x in self.low))
        object.__setattr__(self, "high", tuple(float(x) for x in self.high))

    @property
    def d(self) -> int:
        return len(self.low)

    @classmethod
    def dfe_only(cls) -> "ParamRanges":
        return cls(low=(0.0,) * 4, high=(1.0,) * 4)

    @classmethod
    def ctle_dfe(cls) -> "ParamRanges":
        lo = tuple(r[0] for r in CtleParams.RANGES) + (0.0,) * 4
        hi = tuple(r[1] for r in CtleParams.RANGES) + (1.0,) * 4
        return cls(low=lo, high=hi)


def map_action(a: np.ndarray | ActionVector, r: ParamRanges) -> np.ndarray:
    """Affine map from the normalized box onto the physical box."""
    vec = a.a if isinstance(a, ActionVector) else np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)
    if vec.shape != (r.d,):
        raise ShapeError(f"action shape {vec.shape} does not match {r.d} ranges")
    lo = np.asarray(r.low)
    hi = np.asarray(r.high)
    return lo + vec * (hi - lo)


def unmap_action(p: np.ndarray, r: ParamRanges) -> np.ndarray:
    """Inverse of map_action on the physical box."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (r.d,):
        raise ShapeError(f"parameter shape {p.shape} does not match {r.d} ranges")
    lo = np.asarray(r.low)
    hi = np.asarray(r.high)
    return (p - lo) / (hi - lo)


def params_from_action(a: np.ndarray | ActionVector, r: ParamRanges) -> tuple[CtleParams | None, DfeParams]:
    """Structure a physical parameter vector as (optional CTLE, DFE)."""
    p = map_action(a, r)
    if r.d == 4:
        return None, DfeParams(taps=tuple(p))
    if r.d == 8:
        return CtleParams(g_dc=p[0], f_z=p[1], f_p=p[2], g_p=p[3]), DfeParams(taps=tuple(p[4:]))
    raise ShapeError(f"no equalizer layout for d={r.d}")


@dataclass(frozen=True)
class CtleCoeffs:
    """First-order digital filter, denominator normalized to a0=1."""

    b0: float
    b1: float
    a1: float
    clamped: bool = field(default=False, compare=False)

    @property
    def dc_gain(self) -> float:
        return (self.b0 + self.b1) / (1.0 + self.a1)


def ctle_coeffs(p: CtleParams, dt: float) -> CtleCoeffs:
    """Bilinear-transform discretization of the peaking filter.

    H(s) = G_dc * (s + w_z') / (s + w_p) * (w_p / w_z'), with the zero
    pulled down by the peaking gain: w_z' = w_z * 10^(-G_p/20).  The
    (w_p/w_z') factor pins H(0) = G_dc for every parameter set.
    Frequencies below the 1 MHz floor are clamped (flagged).
    """
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    clamped = p.f_z < FREQ_FLOOR_GHZ or p.f_p < FREQ_FLOOR_GHZ
    f_z = max(p.f_z, FREQ_FLOOR_GHZ)
    f_p = max(p.f_p, FREQ_FLOOR_GHZ)
    w_z = 2.0 * np.pi * f_z * 1e-3  # rad/ps
    w_p = 2.0 * np.pi * f_p * 1e-3
    w_zp = w_z * 10.0 ** (-p.g_p / 20.0)
    k = p.g_dc * w_p / w_zp
    c = 2.0 / dt
    den = c + w_p
    return CtleCoeffs(
        b0=k * (c + w_zp) / den,
        b1=k * (w_zp - c) / den,
        a1=(w_p - c) / den,
        clamped=clamped,
    )


def _check_signal(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise SignalError("signal contains NaN/Inf")


def _rewrap(sig: Waveform | Segment, data: np.ndarray):
    if isinstance(sig, Segment):
        return Segment(data, origin=sig.origin, dt=sig.dt, ui=sig.ui)
    return Waveform(data, dt=sig.dt, ui=sig.ui)


def apply_ctle(sig: Waveform | Segment, p: CtleParams) -> Waveform | Segment:
    """Run the discretized filter over the trace, zero initial state."""
    x = sig.samples if isinstance(sig, Waveform) else sig.data
    _check_signal(x)
    co = ctle_coeffs(p, sig.dt)
    y = lfilter([co.b0, co.b1], [1.0, co.a1], x)
    return _rewrap(sig, y)


def estimate_swing(sig: Waveform | Segment) -> float:
    """Mean magnitude of the UI-center samples; the feedback scale."""
    x = sig.samples if isinstance(sig, Waveform) else sig.data
    t0 = sig.start_ps if isinstance(sig, Segment) else 0.0
    _, idx = ui_center_indices(len(x), sig.dt, sig.ui, t0)
    if idx.size == 0:
        raise SignalError("trace too short to estimate swing (no UI centers)")
    return float(np.mean(np.abs(x[idx])))


def apply_dfe(
    sig: Waveform | Segment,
    p: DfeParams,
    swing_est: float | None = None,
) -> Waveform | Segment:
    """Subtract weighted prior hard decisions, symbol by symbol.

    One decision per UI, taken at the UI-center sample of the corrected
    trace by sign threshold at 0 mV (ties decide +1); the correction for
    a symbol applies to all of its samples.  Decision history starts at
    +1.  swing_est scales the feedback; when omitted it is estimated
    from the input trace's UI centers.
    """
    x = sig.samples if isinstance(sig, Waveform) else sig.data
    _check_signal(x)
    if swing_est is None:
        swing_est = estimate_swing(sig)
    t0 = sig.start_ps if isinstance(sig, Segment) else 0.0
    dt, ui = sig.dt, sig.ui
    n = len(x)

    y = x.astype(np.float64).copy()
    tapv = np.asarray(p.taps, dtype=np.float64) * swing_est
    hist = np.ones(len(tapv))  # hist[0] is the most recent decision
    k_first = int(np.floor(t0 / ui))
    k_last = int(np.floor((t0 + (n - 1) * dt) / ui))
    for k in range(k_first, k_last + 1):
        i0 = max(int(np.ceil((k * ui - t0) / dt - 1e-9)), 0)
        i1 = min(int(np.ceil(((k + 1) * ui - t0) / dt - 1e-9)), n)
        if i0 >= i1:
            continue
        corr = float(tapv @ hist)
        ic = int(np.rint(((k + 0.5) * ui - t0) / dt))
        dec = 1.0 if (ic < i0 or ic >= i1 or x[ic] - corr >= 0.0) else -1.0
        y[i0:i1] -= corr
        hist[1:] = hist[:-1]
        hist[0] = dec
    return _rewrap(sig, y)


def apply_chain(
    sig: Waveform | Segment,
    ctle: CtleParams | None,
    dfe: DfeParams,
    swing_est: float | None = None,
) -> Waveform | Segment:
    """CTLE (when configured) followed by the DFE."""
    stage = apply_ctle(sig, ctle) if ctle is not None else sig
    return apply_dfe(stage, dfe, swing_est=swing_est)
