"""Bit error rate by hard decision at the UI-center samples."""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..signal import ui_center_indices


def compute_ber(equalized, bits) -> float:
    """Fraction of UI-center decisions (threshold 0 mV) disagreeing with
    the transmitted bits. The trace must cover exactly one center per bit."""
    samples = np.asarray(equalized.samples, dtype=np.float64)
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.size < 1:
        raise DataError("need a non-empty 1-D bit sequence")
    ks, idx = ui_center_indices(samples.size, equalized.dt, equalized.ui)
    if ks.size != bits.size or ks[0] != 0:
        raise DataError(f"trace covers {ks.size} UI centers but {bits.size} bits were sent")
    decisions = samples[idx] >= 0.0
    return float(np.mean(decisions != (bits > 0)))
