"""Reverberation time from Schroeder backward integration."""
import logging

import numpy as np
from scipy import stats

from utils.errors import NumericalError

logger = logging.getLogger(__name__)

FIT_RANGE_DB = (-5.0, -35.0)
MIN_DECAY_DB = 40.0


def schroeder_curve(taps: np.ndarray) -> np.ndarray:
    """Energy decay curve in dB relative to total energy, trailing zeros removed."""
    taps = np.asarray(taps, dtype=np.float64)
    energy = np.cumsum(taps[::-1] ** 2)[::-1]

    nonzero = np.flatnonzero(energy > 0)
    if nonzero.size == 0:
        return np.zeros(0)

    energy = energy[: nonzero[-1] + 1]
    return 10 * np.log10(energy / energy[0])


def estimate_rt60(rir, sample_rate: int = None) -> float:
    """T30 estimate: line fit on the -5 dB to -35 dB part of the decay curve.

    :param rir: a Rir, or raw taps together with ``sample_rate``
    :return: RT60 in seconds
    """
    taps = getattr(rir, "taps", rir)
    fs = sample_rate or rir.sample_rate

    edc_db = schroeder_curve(taps)
    if edc_db.size == 0 or edc_db[-1] > -MIN_DECAY_DB:
        decay = 0.0 if edc_db.size == 0 else -edc_db[-1]
        raise NumericalError(
            f"insufficient decay range: {decay:.1f} dB, need at least {MIN_DECAY_DB:.0f} dB"
        )

    start, end = FIT_RANGE_DB
    segment = np.flatnonzero((edc_db <= start) & (edc_db >= end))
    if segment.size < 2:
        raise NumericalError("too few samples in the -5 dB to -35 dB range for a decay fit")

    fit = stats.linregress(segment / fs, edc_db[segment])
    if fit.slope >= 0:
        raise NumericalError(f"decay curve is not decaying (slope {fit.slope:.3f} dB/s)")

    # time for 30 dB of decay, doubled
    return 2 * (-30.0 / fit.slope)
