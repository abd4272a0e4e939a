"""Normalised autocorrelation of STFT bin trajectories."""
from dataclasses import dataclass
from typing import Sequence
import logging
import math

import numpy as np
import pandas as pd
from scipy import signal

from dsp.stft import ComplexSpectrogram
from utils.errors import DataError

logger = logging.getLogger(__name__)

DEFAULT_MAX_LAG = 100
TAIL_FROM_LAG = 10


@dataclass(frozen=True, eq=False)
class AutocorrCurve:
    values: np.ndarray
    trajectories: int = 1
    skipped: int = 0

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.values.size)

    @property
    def max_lag(self) -> int:
        return self.values.size - 1

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lag": self.lags, "r": self.values})


def normalized_autocorr(series, max_lag: int = DEFAULT_MAX_LAG, magnitude: bool = False) -> AutocorrCurve:
    """r(tau) = sum_n conj(s(n)) s(n+tau) / sqrt(E_head(tau) * E_tail(tau)).

    The series is mean-removed first. E_head and E_tail are the energies of the two
    overlapping segments, so r(0) = 1, |r| <= 1 and a periodic series reaches
    exactly 1 at its period. For complex input the real part is reported.

    :param series: real or complex sequence
    :param max_lag: largest lag, must be below the series length
    :param magnitude: correlate |s| instead of s
    """
    s = np.asarray(series)
    s = np.abs(s).astype(np.float64) if magnitude else s.astype(np.complex128)
    n = s.size

    if n <= max_lag:
        raise DataError(f"series of length {n} is too short for max_lag {max_lag}")

    s = s - s.mean()
    power = np.abs(s) ** 2
    if not np.any(power > 0):
        raise DataError("constant series has zero variance")

    full = signal.correlate(s, s, mode="full", method="fft")
    raw = full[n - 1 : n + max_lag]

    head = np.cumsum(power)[::-1][: max_lag + 1]  # sum_{n < N - tau}
    tail = np.cumsum(power[::-1])[::-1][: max_lag + 1]  # sum_{n >= tau}
    denom = np.sqrt(head * tail)

    values = np.zeros(max_lag + 1)
    nonzero = denom > 0
    values[nonzero] = np.real(raw[nonzero]) / denom[nonzero]
    values[0] = 1.0

    return AutocorrCurve(values)


def average_autocorr(
    corpus: Sequence[ComplexSpectrogram],
    max_lag: int = DEFAULT_MAX_LAG,
    magnitude: bool = True,
) -> AutocorrCurve:
    """Mean curve over every bin trajectory of every utterance.

    Magnitude trajectories by default, pass magnitude=False to correlate the complex values.

    Trajectories that are constant or shorter than max_lag + 1 are skipped and counted.
    """
    if not corpus:
        raise DataError("empty corpus")

    curves, skipped = [], 0
    for spectrogram in corpus:
        for k in range(spectrogram.bins):
            try:
                curves.append(normalized_autocorr(spectrogram.values[:, k], max_lag, magnitude).values)
            except DataError:
                skipped += 1

    if not curves:
        raise DataError(f"all {skipped} trajectories are degenerate")
    if skipped:
        logger.warning(f"Skipped {skipped} degenerate trajectories out of {skipped + len(curves)}")

    stacked = np.vstack(curves)
    mean = np.array([math.fsum(column) for column in stacked.T]) / len(curves)
    return AutocorrCurve(mean, trajectories=len(curves), skipped=skipped)


def tail_mass(curve: AutocorrCurve, from_lag: int = TAIL_FROM_LAG) -> float:
    """Mean |r| over lags from_lag..max_lag."""
    if not 0 <= from_lag <= curve.max_lag:
        raise DataError(f"from_lag {from_lag} outside 0..{curve.max_lag}")
    return float(np.mean(np.abs(curve.values[from_lag:])))
