"""Synthetic link: NRZ source, symbol-spaced ISI, low-pass, and noise.

Stands in for recorded hardware waveforms.  The model is deliberately
small: a main cursor plus a few post-cursors give genuine inter-symbol
interference, a first-order low-pass rounds the edges, and additive
Gaussian noise closes the eye the rest of the way.  Everything is
deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, ParameterError
from .signal import DEFAULT_DT_PS, DEFAULT_UI_PS, EyeMask, Segment, Waveform, extract_segments, label_validity


@dataclass(frozen=True)
class ChannelConfig:
    """Knobs of the synthetic link.

    lp_pole is in GHz; None disables the low-pass.  main_cursor scales the
    whole link (1.0 nominally).  The defaults are the stressed setting used
    by the training pipeline: enough ISI and noise that a labeled dataset
    contains both classes.
    """

    seed: int = 0
    swing: float = 400.0
    main_cursor: float = 1.0
    isi_taps: tuple[float, ...] = (0.35, 0.18, 0.08)
    lp_pole: float | None = 5.8
    noise_sigma: float = 8.0
    n_bits: int = 2000
    dt: float = DEFAULT_DT_PS
    ui: float = DEFAULT_UI_PS

    def __post_init__(self):
        if self.swing <= 0:
            raise ConfigError(f"swing must be positive, got {self.swing}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not all(math.isfinite(t) for t in self.isi_taps):
            raise ConfigError("isi_taps must be finite")
        if self.lp_pole is not None and not (self.lp_pole > 0):
            raise ConfigError(f"lp_pole must be positive or None, got {self.lp_pole}")
        if self.n_bits < 1:
            raise ConfigError("n_bits must be >= 1")
        object.__setattr__(self, "isi_taps", tuple(float(t) for t in self.isi_taps))


@dataclass
class DataPair:
    """Ideal transmitted waveform and its channel-degraded counterpart."""

    input: Waveform
    output: Waveform
    bits: np.ndarray

    def __post_init__(self):
        if self.input.dt != self.output.dt or self.input.ui != self.output.ui:
            raise ConfigError("input and output must share dt and ui")
        if len(self.input) != len(self.output):
            raise ConfigError("input and output must have equal length")


def generate_bits(n: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-random bits, roughly balanced."""
    if n < 1:
        raise ParameterError(f"bit count must be >= 1, got {n}")
    return np.random.default_rng(seed).integers(0, 2, size=n, dtype=np.int8)


def _render_symbols(levels: np.ndarray, n_samples: int, dt: float, ui: float) -> np.ndarray:
    """Zero-order hold: each sample takes the level of the UI containing it."""
    k = np.floor(np.arange(n_samples) * dt / ui).astype(np.int64)
    np.clip(k, 0, len(levels) - 1, out=k)
    return levels[k]


def _lowpass(x: np.ndarray, pole_ghz: float, dt: float) -> np.ndarray:
    """First-order low-pass, initialized at the first sample (no startup kick)."""
    tau = 1.0 / (2.0 * np.pi * pole_ghz * 1e-3)  # GHz -> rad/ps
    alpha = dt / (tau + dt)
    y, _ = lfilter([alpha], [1.0, alpha - 1.0], x, zi=np.array([(1.0 - alpha) * x[0]]))
    return y


def synthesize_pair(cfg: ChannelConfig) -> DataPair:
    """Generate one (ideal, degraded) waveform pair.

    The ideal side is the clean NRZ train at +-swing.  The degraded side
    passes the symbol stream through the post-cursor FIR, renders it to
    the sample grid, low-passes, and adds noise.
    """
    bits = generate_bits(cfg.n_bits, cfg.seed)
    symbols = bits.astype(np.float64) * 2.0 - 1.0
    n_samples = int(np.floor(cfg.n_bits * cfg.ui / cfg.dt))

    ideal = cfg.swing * _render_symbols(symbols, n_samples, cfg.dt, cfg.ui)

    h = np.array([cfg.main_cursor, *cfg.isi_taps], dtype=np.float64)
    levels = np.convolve(symbols, h)[: cfg.n_bits]
    out = cfg.swing * _render_symbols(levels, n_samples, cfg.dt, cfg.ui)

    if cfg.lp_pole is not None and np.isfinite(cfg.lp_pole):
        out = _lowpass(out, cfg.lp_pole, cfg.dt)
    if cfg.noise_sigma > 0:
        noise_rng = np.random.default_rng([cfg.seed, 1])
        out = out + cfg.noise_sigma * noise_rng.standard_normal(n_samples)

    return DataPair(
        input=Waveform(ideal, dt=cfg.dt, ui=cfg.ui),
        output=Waveform(out, dt=cfg.dt, ui=cfg.ui),
        bits=bits,
    )


@dataclass
class LabeledDataset:
    """Rolling-window segments of a degraded waveform with validity labels.

    `inputs` holds the aligned slices of the ideal waveform; reward and
    error-rate oracles need them.
    """

    segments: list[Segment]
    inputs: list[Segment]
    labels: np.ndarray
    mask: EyeMask
    config: ChannelConfig

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def matrix(self) -> np.ndarray:
        """Segments stacked as an (n_segments, n_x) array."""
        return np.stack([s.data for s in self.segments])

    @property
    def input_matrix(self) -> np.ndarray:
        return np.stack([s.data for s in self.inputs])

    @property
    def valid_fraction(self) -> float:
        return float(np.mean(self.labels))


def build_dataset(
    cfg: ChannelConfig,
    n_x: int,
    stride: int = 1,
    mask: EyeMask | None = None,
) -> LabeledDataset:
    """Synthesize a pair, segment the degraded side, and label every segment."""
    if mask is None:
        mask = EyeMask(center_t=cfg.ui / 2.0)
    pair = synthesize_pair(cfg)
    segments = extract_segments(pair.output, n_x=n_x, stride=stride)
    inputs = extract_segments(pair.input, n_x=n_x, stride=stride)
    labels = np.array([label_validity(s, mask, swing=cfg.swing) for s in segments], dtype=np.int8)
    return LabeledDataset(segments=segments, inputs=inputs, labels=labels, mask=mask, config=cfg)


def perturbed_unit(cfg: ChannelConfig, unit: int, rel_scale: float = 0.15) -> ChannelConfig:
    """Channel variant emulating another hardware unit of the same design.

    Post-cursor taps get a deterministic multiplicative jitter drawn from
    the unit index, so unit k is the same channel family with slightly
    different reflections.  rel_scale is an experimental knob, not a
    calibrated value.
    """
    if unit < 0:
        raise ParameterError("unit index must be >= 0")
    rng = np.random.default_rng([cfg.seed, 7000 + unit])
    jitter = 1.0 + rel_scale * rng.uniform(-1.0, 1.0, size=len(cfg.isi_taps))
    taps = tuple(float(t * j) for t, j in zip(cfg.isi_taps, jitter))
    return replace(cfg, isi_taps=taps, seed=cfg.seed + 104729 * (unit + 1))
