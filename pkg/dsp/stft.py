from dataclasses import dataclass
from typing import TYPE_CHECKING
import logging

import numpy as np
from scipy import fft
from scipy.signal import get_window

from dsp.audio import Waveform, DEFAULT_SAMPLE_RATE
from utils.errors import ConfigError, DataError

if TYPE_CHECKING:
    from ncfir.filter import BinTrajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StftConfig:
    frame_len: int = 400
    frame_shift: int = 160
    fft_size: int = 512
    window: str = "hann"
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if not 0 < self.frame_shift <= self.frame_len <= self.fft_size:
            raise ConfigError(
                f"need 0 < frame_shift <= frame_len <= fft_size, got "
                f"{self.frame_shift}/{self.frame_len}/{self.fft_size}"
            )
        if self.fft_size & (self.fft_size - 1):
            raise ConfigError(f"fft_size must be a power of two, got {self.fft_size}")

    @classmethod
    def for_rate(cls, sample_rate: int, window: str = "hann") -> "StftConfig":
        """25 ms frames with a 10 ms shift, FFT size the next power of two."""
        frame_len = int(round(0.025 * sample_rate))
        frame_shift = int(round(0.010 * sample_rate))
        fft_size = 1 << int(np.ceil(np.log2(frame_len)))
        return cls(frame_len, frame_shift, fft_size, window, sample_rate)

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def analysis_window(self) -> np.ndarray:
        # periodic window, as used for spectral analysis
        return get_window(self.window, self.frame_len, fftbins=True)

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.frame_len:
            return 0
        return 1 + (n_samples - self.frame_len) // self.frame_shift


@dataclass(frozen=True, eq=False)
class ComplexSpectrogram:
    values: np.ndarray
    config: StftConfig

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.ndim != 2:
            raise DataError(f"spectrogram values must be frames x bins, got shape {values.shape}")
        if values.shape[1] != self.config.n_bins:
            raise DataError(
                f"spectrogram has {values.shape[1]} bins, config implies {self.config.n_bins}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def bins(self) -> int:
        return self.values.shape[1]

    def trajectory(self, k: int) -> "BinTrajectory":
        from ncfir.filter import BinTrajectory

        return BinTrajectory(self.values[:, k], bin_index=k)

    def with_values(self, values: np.ndarray) -> "ComplexSpectrogram":
        return ComplexSpectrogram(values, self.config)

    def truncate(self, n_frames: int) -> "ComplexSpectrogram":
        return ComplexSpectrogram(self.values[:n_frames], self.config)


def _frames(samples: np.ndarray, config: StftConfig) -> np.ndarray:
    n_frames = config.n_frames(samples.size)
    windows = np.lib.stride_tricks.sliding_window_view(samples, config.frame_len)
    return windows[:: config.frame_shift][:n_frames]


def stft(waveform: Waveform, config: StftConfig = None) -> ComplexSpectrogram:
    """Short-time Fourier transform, trailing partial frame dropped.

    Frame n covers samples [n*shift, n*shift + frame_len).

    :param waveform: input signal
    :param config: framing, defaults to 25 ms / 10 ms at the waveform's rate
    :return: N x (fft_size/2 + 1) spectrogram
    """
    if config is None:
        config = StftConfig.for_rate(waveform.sample_rate)

    if waveform.sample_rate != config.sample_rate:
        raise DataError(
            f"waveform is {waveform.sample_rate} Hz but StftConfig expects {config.sample_rate} Hz"
        )

    if waveform.samples.size < config.frame_len:
        raise DataError(
            f"waveform of {waveform.samples.size} samples is shorter than one frame ({config.frame_len})"
        )

    frames = _frames(waveform.samples, config) * config.analysis_window()
    values = fft.rfft(frames, n=config.fft_size, axis=1)

    return ComplexSpectrogram(values, config)


def istft(spectrogram: ComplexSpectrogram) -> Waveform:
    """Least-squares overlap-add synthesis.

    Each frame is inverse transformed, windowed again and overlap-added; the sum
    is divided by the summed squared window wherever that sum is nonzero.
    """
    config = spectrogram.config
    window = config.analysis_window()
    n_frames = spectrogram.frames

    if n_frames == 0:
        return Waveform(np.zeros(0), config.sample_rate)

    frames = fft.irfft(spectrogram.values, n=config.fft_size, axis=1)[:, : config.frame_len]
    frames = frames * window

    length = (n_frames - 1) * config.frame_shift + config.frame_len
    out = np.zeros(length)
    norm = np.zeros(length)

    for n in range(n_frames):
        start = n * config.frame_shift
        out[start : start + config.frame_len] += frames[n]
        norm[start : start + config.frame_len] += window**2

    nonzero = norm > 1e-12
    out[nonzero] /= norm[nonzero]
    out[~nonzero] = 0.0

    return Waveform(out, config.sample_rate)


def full_spectrum_energy(spectrogram: ComplexSpectrogram) -> np.ndarray:
    """Per-frame energy of the full (conjugate-symmetric) spectrum."""
    power = np.abs(spectrogram.values) ** 2
    fft_size = spectrogram.config.fft_size
    # bins 1..fft_size/2-1 appear twice in the full spectrum
    weights = np.full(spectrogram.bins, 2.0)
    weights[0] = 1.0
    if fft_size % 2 == 0:
        weights[-1] = 1.0
    return power @ weights
