from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING
import logging

import numpy as np
import soundfile as sf
from scipy import signal

from utils.errors import DataError

if TYPE_CHECKING:
    from rir.image_method import Rir

logger = logging.getLogger(__name__)

# 16-bit PCM is mapped to [-1, 1) by dividing by this
PCM16_SCALE = 32768.0
DEFAULT_SAMPLE_RATE = 16000


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).ravel()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise DataError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    def scaled(self, gain: float) -> "Waveform":
        return Waveform(self.samples * gain, self.sample_rate)


def read_wav(path: Path) -> Waveform:
    """Read a 16-bit PCM mono WAV file.

    :param path: path to the file
    :return: Waveform with samples scaled to [-1, 1)
    """
    try:
        info = sf.info(str(path))
    except (RuntimeError, OSError) as e:
        raise DataError(f"Couldn't read {path}: {e}") from e

    if info.channels != 1:
        raise DataError(f"{path}: expected mono audio, got {info.channels} channels")

    if info.subtype != "PCM_16":
        raise DataError(f"{path}: unsupported encoding {info.subtype}, only PCM_16 is supported")

    data, sample_rate = sf.read(str(path), dtype="int16", always_2d=True)

    return Waveform(data[:, 0].astype(np.float64) / PCM16_SCALE, sample_rate)


def write_wav(waveform: Waveform, path: Path):
    samples = waveform.samples

    if not np.all(np.isfinite(samples)):
        raise DataError(f"Refusing to write {path}: waveform contains NaN or infinite samples")

    clipped = np.abs(samples) > (PCM16_SCALE - 1) / PCM16_SCALE
    if clipped.any():
        logger.warning(f"{path}: clipping {clipped.sum()} samples outside the 16-bit range")

    pcm = np.clip(np.round(samples * PCM16_SCALE), -PCM16_SCALE, PCM16_SCALE - 1).astype(np.int16)

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        sf.write(str(path), pcm, waveform.sample_rate, subtype="PCM_16", format="WAV")
    except (RuntimeError, OSError) as e:
        raise DataError(f"Couldn't write {path}: {e}") from e


def convolve(waveform: Waveform, rir: "Rir") -> Waveform:
    """Full linear convolution of a waveform with an impulse response.

    :param waveform: the dry signal
    :param rir: anything with ``taps`` and ``sample_rate``
    :return: Waveform of length len(x) + len(h) - 1
    """
    if rir.sample_rate != waveform.sample_rate:
        raise DataError(
            f"sample-rate mismatch: waveform {waveform.sample_rate} Hz, RIR {rir.sample_rate} Hz"
        )

    taps = np.asarray(rir.taps, dtype=np.float64)
    if waveform.samples.size == 0 or taps.size == 0:
        return Waveform(np.zeros(max(0, waveform.samples.size + taps.size - 1)), waveform.sample_rate)

    return Waveform(signal.fftconvolve(waveform.samples, taps, mode="full"), waveform.sample_rate)
