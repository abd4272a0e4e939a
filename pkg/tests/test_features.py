import numpy as np
import pytest

from dsp.audio import Waveform
from dsp.stft import StftConfig, stft
from features import (
    LogMelSeq,
    align_pairs,
    extract_features,
    features_to_frame,
    load_features,
    log_mel,
    mel_bank,
    mvn,
    save_features,
    stack_context,
)
from utils.errors import ConfigError, DataError


@pytest.fixture(scope="module")
def bank():
    return mel_bank(512, 16000, 40)


def test_bank_shape_and_geometry(bank):
    assert bank.weights.shape == (40, 257)
    assert np.all(bank.weights >= 0)
    assert np.all(np.diff(bank.peak_bins()) > 0)
    assert np.all(np.diff(bank.center_freqs) > 0)

    first, last = bank.peak_bins()[0], bank.peak_bins()[-1]
    assert np.all(bank.weights[:, first : last + 1].sum(axis=0) > 0)


def test_bank_filters_are_contiguous(bank):
    for row in bank.weights:
        support = np.flatnonzero(row)
        assert np.all(np.diff(support) == 1)


def test_too_many_filters_for_the_fft():
    with pytest.raises(ConfigError):
        mel_bank(fft_size=64, sample_rate=16000, n_mels=40)


def test_zero_spectrogram_sits_on_the_floor(bank):
    spectrogram = stft(Waveform(np.zeros(2000)))
    features = log_mel(spectrogram, bank, floor=1e-6)
    np.testing.assert_allclose(features.values, np.log(1e-6))


def test_scaling_shifts_log_energies(bank, speech):
    config = StftConfig.for_rate(16000)
    base = log_mel(stft(speech, config), bank, floor=1e-30).values
    louder = log_mel(stft(speech.scaled(3.0), config), bank, floor=1e-30).values
    np.testing.assert_allclose(louder - base, 2 * np.log(3.0), atol=1e-9)


def test_tone_peaks_in_the_nearest_filter(bank):
    freq = 1000.0
    t = np.arange(8000) / 16000
    features = log_mel(stft(Waveform(np.sin(2 * np.pi * freq * t))), bank)

    nearest = int(np.argmin(np.abs(bank.center_freqs - freq)))
    assert np.all(np.argmax(features.values, axis=1) == nearest)


def test_mvn_normalises_every_dimension(rng):
    seq = LogMelSeq(rng.normal(3.0, 2.0, size=(50, 40)))
    normalised = mvn(seq)

    assert np.all(np.abs(normalised.values.mean(axis=0)) <= 1e-9)
    assert np.all(np.abs(normalised.values.var(axis=0) - 1) <= 1e-6)
    np.testing.assert_allclose(mvn(normalised).values, normalised.values, atol=1e-9)


def test_mvn_only_centres_constant_dimensions():
    values = np.column_stack([np.full(10, 4.0), np.arange(10.0)])
    normalised = mvn(LogMelSeq(values))
    assert not normalised.values[:, 0].any()

    with pytest.raises(DataError, match="at least 2 frames"):
        mvn(LogMelSeq(values[:1]))


def test_stack_context_zero_pads():
    frames = np.arange(1, 7, dtype=float).reshape(3, 2)
    seq = LogMelSeq(frames)

    np.testing.assert_array_equal(stack_context(seq, 0, 0).values, frames)

    stacked = stack_context(seq, 1, 1)
    np.testing.assert_array_equal(stacked.values[1], [1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(stacked.values[0], [0, 0, 1, 2, 3, 4])
    np.testing.assert_array_equal(stacked.values[2], [3, 4, 5, 6, 0, 0])
    assert stacked.values.shape == (3, 6)


def test_full_context_dimensionality(rng):
    assert stack_context(LogMelSeq(rng.normal(size=(30, 40))), 10, 10).values.shape == (30, 840)


def test_align_pairs(rng):
    reverb, clean = LogMelSeq(rng.normal(size=(105, 40))), LogMelSeq(rng.normal(size=(98, 40)))
    aligned_reverb, aligned_clean = align_pairs(reverb, clean)
    assert aligned_reverb.frames == aligned_clean.frames == 98

    with pytest.raises(DataError, match="longer than reverberant"):
        align_pairs(clean, reverb)


def test_extract_features(speech):
    features = extract_features(speech)
    assert features.values.shape == (98, 40)
    assert np.all(np.abs(features.values.mean(axis=0)) <= 1e-9)


def test_feature_file_and_frame(tmp_path, speech):
    features = extract_features(speech)
    save_features(features, tmp_path / "utt.ncft")
    restored = load_features(tmp_path / "utt.ncft")
    np.testing.assert_allclose(restored.values, features.values, atol=1e-5)

    frame = features_to_frame(features)
    assert list(frame.columns[:3]) == ["frame", "lfe_00", "lfe_01"]
    assert len(frame) == 98
