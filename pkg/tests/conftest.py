from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from dsp.audio import Waveform, convolve, write_wav
from rir.image_method import image_method_rir
from rir.room import RoomSpec, sample_room_set

SAMPLE_RATE = 16000


def synthetic_speech(seed: int, seconds: float = 1.0, sample_rate: int = SAMPLE_RATE) -> Waveform:
    """Voiced harmonic bursts, noise bursts and pauses, peak 0.5."""
    rng = np.random.default_rng(seed)
    n = int(seconds * sample_rate)
    samples = np.zeros(n)

    start = 0
    while start < n:
        length = min(int(rng.uniform(0.08, 0.22) * sample_rate), n - start)
        t = np.arange(length) / sample_rate
        envelope = np.hanning(length)
        kind = rng.choice(["voiced", "voiced", "noise", "pause"])

        if kind == "voiced":
            f0 = rng.uniform(100, 220) * (1 + 0.05 * t / max(t[-1], 1e-9))
            phase = 2 * np.pi * np.cumsum(f0) / sample_rate
            burst = sum(np.sin(h * phase) / h for h in range(1, 25) if h * f0[0] < sample_rate / 2)
        elif kind == "noise":
            burst = 0.3 * rng.normal(size=length)
        else:
            burst = np.zeros(length)

        samples[start : start + length] = envelope * burst
        start += length

    samples += 1e-4 * rng.normal(size=n)
    return Waveform(0.5 * samples / np.max(np.abs(samples)), sample_rate)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def speech() -> Waveform:
    return synthetic_speech(seed=7)


@pytest.fixture(scope="session")
def room() -> RoomSpec:
    return RoomSpec(dims=(7.95, 5.68, 4.5), src=(2.0, 2.0, 1.5), mic=(3.2, 2.6, 1.5), rt60=0.5)


@pytest.fixture(scope="session")
def rir(room):
    return image_method_rir(room)


@pytest.fixture(scope="session")
def reverb_corpus(rir):
    """Six (reverberant, clean) waveform pairs through one room."""
    pairs = []
    for seed in range(6):
        clean = synthetic_speech(seed=100 + seed)
        reverb = convolve(clean, rir)
        pairs.append((reverb.scaled(0.5 / np.max(np.abs(reverb.samples))), clean))
    return pairs


@pytest.fixture(scope="session")
def room_corpus():
    """24 two-second (reverberant, clean) pairs, each through its own room with RT60 in [0.4, 1.0]."""
    rng = np.random.default_rng(2024)
    pairs = []
    for i, spec in enumerate(sample_room_set(seed=2024, count=24)):
        spec = replace(spec, rt60=float(rng.uniform(0.4, 1.0)), max_rir_len=None)
        clean = synthetic_speech(seed=500 + i, seconds=2.0)
        reverb = convolve(clean, image_method_rir(spec))
        pairs.append((reverb.scaled(0.5 / np.max(np.abs(reverb.samples))), clean))
    return pairs


@pytest.fixture
def clean_dir(tmp_path) -> Path:
    directory = tmp_path / "clean"
    for i in range(5):
        write_wav(synthetic_speech(seed=i, seconds=1.0), directory / f"utt_{i:03d}.wav")
    return directory
