from types import SimpleNamespace

import numpy as np
import pytest
import soundfile as sf

from dsp.audio import PCM16_SCALE, Waveform, convolve, read_wav, write_wav
from dsp.stft import StftConfig, full_spectrum_energy, istft, stft
from utils.errors import ConfigError, DataError


def test_wav_round_trip_is_within_one_lsb(tmp_path, rng):
    waveform = Waveform(rng.uniform(-0.9, 0.9, size=4000))
    write_wav(waveform, tmp_path / "x.wav")
    restored = read_wav(tmp_path / "x.wav")

    assert restored.sample_rate == 16000
    assert np.max(np.abs(restored.samples - waveform.samples)) <= 1 / PCM16_SCALE


def test_silence_reads_as_zeros(tmp_path):
    write_wav(Waveform(np.zeros(16000)), tmp_path / "silence.wav")
    restored = read_wav(tmp_path / "silence.wav")
    assert len(restored) == 16000
    assert not restored.samples.any()


def test_empty_waveform_round_trips(tmp_path):
    write_wav(Waveform(np.zeros(0)), tmp_path / "empty.wav")
    assert len(read_wav(tmp_path / "empty.wav")) == 0


def test_nan_samples_are_refused(tmp_path):
    with pytest.raises(DataError):
        write_wav(Waveform([0.1, np.nan, 0.2]), tmp_path / "nan.wav")


def test_stereo_and_8_bit_files_are_rejected(tmp_path):
    sf.write(str(tmp_path / "stereo.wav"), np.zeros((100, 2), dtype=np.int16), 16000, subtype="PCM_16")
    with pytest.raises(DataError, match="2 channels"):
        read_wav(tmp_path / "stereo.wav")

    sf.write(str(tmp_path / "u8.wav"), np.zeros(100), 16000, subtype="PCM_U8")
    with pytest.raises(DataError, match="unsupported encoding"):
        read_wav(tmp_path / "u8.wav")


def test_waveform_validates_sample_rate():
    with pytest.raises(DataError):
        Waveform([0.0], sample_rate=0)


def test_convolve_matches_direct_sum(rng):
    x = rng.normal(size=50)
    h = rng.normal(size=8)
    out = convolve(Waveform(x), SimpleNamespace(taps=h, sample_rate=16000))

    direct = np.zeros(57)
    for i, xi in enumerate(x):
        direct[i : i + 8] += xi * h

    assert len(out) == 57
    np.testing.assert_allclose(out.samples, direct, rtol=1e-10, atol=1e-12)


def test_convolve_with_unit_impulse_is_identity(speech):
    out = convolve(speech, SimpleNamespace(taps=[1.0], sample_rate=16000))
    np.testing.assert_allclose(out.samples, speech.samples, atol=1e-12)


def test_convolve_rejects_rate_mismatch(speech):
    with pytest.raises(DataError, match="sample-rate mismatch"):
        convolve(speech, SimpleNamespace(taps=[1.0], sample_rate=8000))


def test_default_config_and_frame_count(speech):
    config = StftConfig.for_rate(16000)
    assert (config.frame_len, config.frame_shift, config.fft_size) == (400, 160, 512)

    spectrogram = stft(speech, config)
    assert spectrogram.frames == 98
    assert spectrogram.bins == 257


def test_invalid_stft_config():
    with pytest.raises(ConfigError):
        StftConfig(frame_len=400, frame_shift=160, fft_size=500)
    with pytest.raises(ConfigError):
        StftConfig(frame_len=600, frame_shift=160, fft_size=512)


def test_stft_rejects_short_input():
    with pytest.raises(DataError, match="shorter than one frame"):
        stft(Waveform(np.zeros(399)))


def test_zero_input_gives_zero_spectrogram():
    assert not stft(Waveform(np.zeros(2000))).values.any()


def test_bin_centred_cosine_stays_in_its_bin():
    k = 40
    t = np.arange(16000)
    spectrogram = stft(Waveform(np.cos(2 * np.pi * k * t / 512)))

    power = np.abs(spectrogram.values) ** 2
    near = power[:, k - 1 : k + 2].sum(axis=1)
    assert np.all(near >= 0.9 * power.sum(axis=1))


def test_stft_is_linear(rng):
    x, y = rng.normal(size=3000), rng.normal(size=3000)
    combined = stft(Waveform(0.7 * x - 0.4 * y)).values
    separate = 0.7 * stft(Waveform(x)).values - 0.4 * stft(Waveform(y)).values
    assert np.linalg.norm(combined - separate) <= 1e-9 * np.linalg.norm(separate)


def test_istft_reconstructs_interior(rng):
    x = rng.normal(size=8000)
    config = StftConfig.for_rate(16000)
    out = istft(stft(Waveform(x), config)).samples

    interior = slice(config.frame_len, out.size - config.frame_len)
    error = np.linalg.norm(out[interior] - x[interior]) / np.linalg.norm(x[interior])
    assert error <= 1e-6


def test_full_spectrum_energy_matches_windowed_frames(rng):
    x = rng.normal(size=4000)
    config = StftConfig.for_rate(16000)
    spectrogram = stft(Waveform(x), config)

    window = config.analysis_window()
    frames = np.array([x[n * 160 : n * 160 + 400] * window for n in range(spectrogram.frames)])
    time_energy = np.sum(frames**2, axis=1)

    np.testing.assert_allclose(full_spectrum_energy(spectrogram) / config.fft_size, time_energy, rtol=1e-9)
