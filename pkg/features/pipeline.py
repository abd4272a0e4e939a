from pathlib import Path
from typing import Optional
import logging

import pandas as pd

from dsp.audio import Waveform
from dsp.stft import StftConfig, stft
from features.context import mvn
from features.mel import LogMelSeq, MelFilterBank, log_mel, mel_bank, N_MELS
from utils.binary_io import write_features, read_features

logger = logging.getLogger(__name__)


def extract_features(
    waveform: Waveform,
    stft_config: Optional[StftConfig] = None,
    bank: Optional[MelFilterBank] = None,
    normalize: bool = True,
) -> LogMelSeq:
    """stft -> 40-band log-Mel -> per-utterance MVN.

    :param waveform: input utterance
    :param stft_config: defaults to 25 ms / 10 ms at the waveform's rate
    :param bank: defaults to 40 filters matching the STFT
    :param normalize: apply MVN
    """
    if stft_config is None:
        stft_config = StftConfig.for_rate(waveform.sample_rate)
    if bank is None:
        bank = mel_bank(stft_config.fft_size, stft_config.sample_rate, N_MELS)

    features = log_mel(stft(waveform, stft_config), bank)
    return mvn(features) if normalize else features


def save_features(seq, path: Path):
    write_features(path, seq.values)


def load_features(path: Path) -> LogMelSeq:
    return LogMelSeq(read_features(path))


def features_to_frame(seq: LogMelSeq) -> pd.DataFrame:
    frame = pd.DataFrame(seq.values, columns=[f"lfe_{k:02d}" for k in range(seq.dims)])
    frame.insert(0, "frame", range(seq.frames))
    return frame
