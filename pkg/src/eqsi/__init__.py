"""Equalizer optimization on latent-space signal integrity, at desk scale.

The package is organized as a pipeline: synthesize channel data
(`eqsi.channel`), cut and label segments (`eqsi.signal`), score eyes
(`eqsi.eye`), train the latent SI scorer (`eqsi.nn`, `eqsi.latent`),
then search equalizer settings with an actor-critic (`eqsi.a2c`) or the
reference optimizers in `eqsi.baselines`.
"""

from .errors import (
    BudgetError,
    ConfigError,
    DataError,
    EqsiError,
    MetricUndefined,
    ObjectiveError,
    OptimError,
    ParameterError,
    SegmentationError,
    ShapeError,
    SignalError,
    TapeError,
)
from .signal import EyeMask, Segment, Waveform, extract_segments, interpolate, label_validity
from .version import __version__

__all__ = [
    "BudgetError",
    "ConfigError",
    "DataError",
    "EqsiError",
    "EyeMask",
    "MetricUndefined",
    "ObjectiveError",
    "OptimError",
    "ParameterError",
    "Segment",
    "SegmentationError",
    "ShapeError",
    "SignalError",
    "TapeError",
    "Waveform",
    "extract_segments",
    "interpolate",
    "label_validity",
    "__version__",
]
