"""Mel filterbank and log filter energies."""
from dataclasses import dataclass
from typing import Optional
import logging

import librosa
import numpy as np

from dsp.stft import ComplexSpectrogram
from utils.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

N_MELS = 40
RELATIVE_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class MelFilterBank:
    weights: np.ndarray
    fft_size: int
    sample_rate: int
    center_freqs: np.ndarray

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]

    @property
    def n_bins(self) -> int:
        return self.weights.shape[1]

    def peak_bins(self) -> np.ndarray:
        return np.argmax(self.weights, axis=1)


@dataclass(frozen=True, eq=False)
class LogMelSeq:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"log-Mel values must be frames x dims, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("log-Mel values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def truncate(self, n_frames: int) -> "LogMelSeq":
        return LogMelSeq(self.values[:n_frames])


def mel_bank(fft_size: int = 512, sample_rate: int = 16000, n_mels: int = N_MELS) -> MelFilterBank:
    """Triangular filters on HTK-Mel spaced centres between 0 Hz and Nyquist.

    :param fft_size: FFT size of the spectrograms the bank will be applied to
    :param sample_rate: sampling rate in Hz
    :param n_mels: number of filters
    :return: MelFilterBank with an n_mels x (fft_size/2 + 1) weight matrix
    """
    if n_mels < 1:
        raise ConfigError(f"n_mels must be >= 1, got {n_mels}")
    if fft_size < 2 * n_mels:
        raise ConfigError(f"fft_size {fft_size} is too small for {n_mels} Mel filters")

    fmax = sample_rate / 2
    weights = librosa.filters.mel(
        sr=sample_rate, n_fft=fft_size, n_mels=n_mels, fmin=0.0, fmax=fmax, htk=True, norm=None
    ).astype(np.float64)
    centers = librosa.mel_frequencies(n_mels=n_mels + 2, fmin=0.0, fmax=fmax, htk=True)[1:-1]

    if np.any(weights.max(axis=1) <= 0):
        raise ConfigError(f"{n_mels} Mel filters leave empty filters at fft_size {fft_size}")

    weights.setflags(write=False)
    return MelFilterBank(weights, fft_size, sample_rate, centers)


def log_mel(spectrogram: ComplexSpectrogram, bank: MelFilterBank, floor: Optional[float] = None) -> LogMelSeq:
    """Log of the Mel-weighted spectral energies, floored.

    With no explicit ``floor`` it is 1e-10 times the utterance's largest filter energy.
    """
    if spectrogram.bins != bank.n_bins:
        raise DataError(f"spectrogram has {spectrogram.bins} bins, filterbank expects {bank.n_bins}")

    energies = (np.abs(spectrogram.values) ** 2) @ bank.weights.T

    if floor is None:
        peak = float(energies.max()) if energies.size else 0.0
        floor = RELATIVE_FLOOR * peak if peak > 0 else RELATIVE_FLOOR
    if floor <= 0:
        raise ConfigError(f"energy floor must be positive, got {floor}")

    return LogMelSeq(np.log(np.maximum(energies, floor)))
