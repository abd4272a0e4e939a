"""Image-source simulation of a shoebox room with uniformly absorbing walls."""
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import List, Sequence
import logging
import math

import numpy as np
import pandas as pd
from scipy import signal

from rir.room import RoomSpec, SPEED_OF_SOUND, NOMINAL_DIMS, absorption, sample_room_set
from utils.binary_io import write_rir, read_rir
from utils.errors import DataError
from utils.parallel import map_ordered

logger = logging.getLogger(__name__)

# half-width, in samples, of the windowed-sinc fractional delay
FRACTIONAL_HALF_WIDTH = 4
FRACTIONAL_CUTOFF = 0.9
HIGH_PASS_HZ = 100.0


@dataclass(frozen=True, eq=False)
class Rir:
    taps: np.ndarray
    sample_rate: int
    spec: RoomSpec

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64).ravel()
        if not np.all(np.isfinite(taps)):
            raise DataError("RIR taps must be finite")
        if not np.any(taps != 0):
            raise DataError("RIR has zero energy")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    def __len__(self):
        return self.taps.size

    @property
    def direct_delay(self) -> int:
        """Expected direct-path delay in samples."""
        return int(round(self.spec.distance / SPEED_OF_SOUND * self.sample_rate))

    @property
    def first_arrival(self) -> int:
        return int(np.flatnonzero(self.taps)[0])


def _fractional_weights(delay: np.ndarray):
    """Tap indices and weights of a Hann-windowed sinc centred on each delay."""
    base = np.floor(delay).astype(np.int64)
    for k in range(-FRACTIONAL_HALF_WIDTH + 1, FRACTIONAL_HALF_WIDTH + 1):
        index = base + k
        x = index - delay
        window = 0.5 * (1 + np.cos(np.pi * x / FRACTIONAL_HALF_WIDTH))
        yield index, FRACTIONAL_CUTOFF * np.sinc(FRACTIONAL_CUTOFF * x) * window


def image_method_rir(spec: RoomSpec, fractional_delay: bool = False, high_pass: bool = True) -> Rir:
    """Sum image sources of the room up to the length of the response.

    Each image contributes beta**reflections / (4*pi*d) at delay d/c, with
    beta = sqrt(1 - alpha) and alpha derived from the target RT60.

    :param spec: room geometry and target RT60
    :param fractional_delay: spread each image over an 8-tap windowed sinc
        instead of rounding to the nearest sample
    :param high_pass: remove the low-frequency build-up of the all-positive image sum
        with a 2nd-order Butterworth high-pass at 100 Hz
    :return: Rir truncated at spec.max_rir_len
    """
    if spec.distance == 0:
        raise DataError("source and microphone coincide")

    alpha = absorption(spec.dims, spec.rt60, spec.absorption_model)
    beta = math.sqrt(1 - alpha)

    fs = spec.sample_rate
    n_taps = spec.max_rir_len
    max_distance = n_taps / fs * SPEED_OF_SOUND

    dims = np.asarray(spec.dims)
    src = np.asarray(spec.src)
    mic = np.asarray(spec.mic)
    orders = np.ceil(max_distance / (2 * dims)).astype(int) + 1

    logger.debug(f"alpha={alpha:.4f}, beta={beta:.4f}, image orders {orders.tolist()}")

    h = np.zeros(n_taps)
    # sinc side lobes may not arrive before the direct path
    earliest = int(round(spec.distance / SPEED_OF_SOUND * fs)) - 1
    m = [np.arange(-order, order + 1) for order in orders]

    for parity in np.ndindex(2, 2, 2):
        # per axis: image coordinate relative to the mic, and reflection count
        offset = [(1 - 2 * parity[a]) * src[a] + 2 * m[a] * dims[a] - mic[a] for a in range(3)]
        reflections = [np.abs(m[a] - parity[a]) + np.abs(m[a]) for a in range(3)]

        dyz2 = offset[1][:, None] ** 2 + offset[2][None, :] ** 2
        ryz = reflections[1][:, None] + reflections[2][None, :]

        for dx, rx in zip(offset[0], reflections[0]):
            if abs(dx) > max_distance:
                continue

            d = np.sqrt(dx**2 + dyz2)
            delay = d / SPEED_OF_SOUND * fs
            amplitude = np.power(beta, rx + ryz) / (4 * np.pi * d)

            if fractional_delay:
                near = delay < n_taps + FRACTIONAL_HALF_WIDTH
                for index, weight in _fractional_weights(delay[near]):
                    keep = (index >= earliest) & (index < n_taps)
                    h += np.bincount(
                        index[keep], weights=(amplitude[near] * weight)[keep], minlength=n_taps
                    )
            else:
                index = np.round(delay).astype(np.int64)
                keep = index < n_taps
                if keep.any():
                    h += np.bincount(index[keep], weights=amplitude[keep], minlength=n_taps)

    if high_pass:
        sos = signal.butter(2, HIGH_PASS_HZ, btype="highpass", fs=fs, output="sos")
        h = signal.sosfilt(sos, h)

    return Rir(h, fs, spec)


def make_rir_set(
    seed: int,
    count: int,
    nominal_dims: Sequence[float] = NOMINAL_DIMS,
    sample_rate: int = 16000,
    utterance_count: int = None,
    unique: bool = True,
    fractional_delay: bool = False,
    absorption_model: str = "sabine",
    high_pass: bool = True,
    jobs: int = 1,
) -> List[Rir]:
    """Generate ``count`` independent RIRs, RIR i from the i-th child seed.

    :param utterance_count: when given with ``unique``, every utterance must get
        its own RIR so ``count`` may not be smaller
    """
    if count < 1:
        raise DataError(f"count must be >= 1, got {count}")
    if unique and utterance_count is not None and count < utterance_count:
        raise DataError(
            f"{count} RIRs can't be assigned without replacement to {utterance_count} utterances"
        )

    specs = sample_room_set(seed, count, nominal_dims, sample_rate, absorption_model)
    logger.info(f"Simulating {count} RIRs")

    return map_ordered(partial(image_method_rir, fractional_delay=fractional_delay, high_pass=high_pass), specs, jobs)


def save_rir(rir: Rir, path: Path):
    write_rir(path, rir.taps, rir.spec.to_meta())


def load_rir(path: Path) -> Rir:
    taps, meta = read_rir(path)
    spec = RoomSpec.from_meta(meta)
    return Rir(taps, spec.sample_rate, spec)


def rir_to_frame(rir: Rir) -> pd.DataFrame:
    n = np.arange(rir.taps.size)
    return pd.DataFrame({"sample": n, "time_s": n / rir.sample_rate, "amplitude": rir.taps})
