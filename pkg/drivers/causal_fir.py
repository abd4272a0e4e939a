from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from drivers.base import EnhancerDriver, register_enhancer
from dsp.audio import Waveform
from dsp.stft import StftConfig, istft, stft
from ncfir.filter import NcFirFilter, apply_filter
from ncfir.normal_system import Ridge, build_normal_system, solve_normal_system
from ncfir.spectrogram import filters_to_frame
from utils.errors import DataError, DerevError

logger = logging.getLogger(__name__)


@register_enhancer
class CausalFirEnhancer(EnhancerDriver):
    """Per-bin causal filters (q = 0), one shared filter per bin pooled over the adaptation set."""

    name = "causal-fir"

    def __init__(self, p: int = 10, ridge: Ridge = "auto", stft_config: Optional[StftConfig] = None):
        if p < 0:
            raise DataError(f"p must be >= 0, got {p}")
        self.p = p
        self.ridge = ridge
        self.stft_config = stft_config
        self.filters: List[NcFirFilter] = []
        super().__init__()

    @property
    def requires_fit(self) -> bool:
        return True

    def _config(self, waveform: Waveform) -> StftConfig:
        if self.stft_config is None:
            self.stft_config = StftConfig.for_rate(waveform.sample_rate)
        return self.stft_config

    def fit(self, pairs: Sequence[Tuple[Waveform, Waveform]]) -> "CausalFirEnhancer":
        if not pairs:
            raise DataError("causal-fir enhancer needs at least one adaptation pair")

        systems = None
        for reverb, clean in pairs:
            config = self._config(reverb)
            x = stft(reverb, config)
            y = stft(clean, config)

            per_bin = [build_normal_system(x.trajectory(k), y.trajectory(k), self.p, 0) for k in range(x.bins)]
            systems = per_bin if systems is None else [a + b for a, b in zip(systems, per_bin)]

        self.filters = []
        for k, system in enumerate(systems):
            try:
                self.filters.append(solve_normal_system(system, self.ridge))
            except DerevError as e:
                raise type(e)(f"bin {k}: {e}") from e

        logger.info(f"Fitted causal-fir enhancer (p={self.p}) on {len(pairs)} utterances")
        self.is_fitted = True
        return self

    def enhance(self, waveform: Waveform) -> Waveform:
        self.check_fitted()
        x = stft(waveform, self._config(waveform))
        if x.bins != len(self.filters):
            raise DataError(f"enhancer fitted for {len(self.filters)} bins, utterance has {x.bins}")

        estimate = np.column_stack(
            [apply_filter(filt, x.trajectory(k), x.frames).values for k, filt in enumerate(self.filters)]
        )
        samples = istft(x.with_values(estimate)).samples

        # istft stops at the last full frame
        out = np.zeros(len(waveform))
        out[: samples.size] = samples
        return Waveform(out, waveform.sample_rate)

    def filters_frame(self) -> pd.DataFrame:
        self.check_fitted()
        return filters_to_frame(self.filters)
