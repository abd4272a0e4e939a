from dataclasses import dataclass
from typing import Tuple
import logging

import numpy as np

from features.mel import LogMelSeq
from utils.errors import DataError

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ContextSeq:
    values: np.ndarray
    p: int
    q: int

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] % (self.p + self.q + 1):
            raise DataError(f"context matrix of shape {self.values.shape} doesn't fit p={self.p}, q={self.q}")

    @property
    def frames(self) -> int:
        return self.values.shape[0]


def mvn(seq: LogMelSeq) -> LogMelSeq:
    """Per-utterance mean and variance normalisation of every dimension.

    Dimensions with variance below 1e-12 are only centred.
    """
    if seq.frames < 2:
        raise DataError(f"MVN needs at least 2 frames, got {seq.frames}")

    mean = seq.values.mean(axis=0)
    var = seq.values.var(axis=0)
    scale = np.where(var < VARIANCE_FLOOR, 1.0, np.sqrt(var))

    return LogMelSeq((seq.values - mean) / scale)


def stack_context(seq: LogMelSeq, p: int, q: int) -> ContextSeq:
    """Frame n becomes [f(n-p), ..., f(n), ..., f(n+q)], zero vectors past either end."""
    if p < 0 or q < 0:
        raise DataError(f"p and q must be non-negative, got p={p}, q={q}")

    n_frames, dims = seq.values.shape
    padded = np.vstack([np.zeros((p, dims)), seq.values, np.zeros((q, dims))])

    # (frames, dims, window) -> (frames, window, dims)
    windows = np.lib.stride_tricks.sliding_window_view(padded, p + q + 1, axis=0)
    stacked = windows.transpose(0, 2, 1).reshape(n_frames, (p + q + 1) * dims)

    return ContextSeq(np.ascontiguousarray(stacked), p, q)


def align_pairs(reverb: LogMelSeq, clean: LogMelSeq) -> Tuple[LogMelSeq, LogMelSeq]:
    """Truncate the reverberant sequence to the clean length, no lag search."""
    if clean.frames > reverb.frames:
        raise DataError(f"clean sequence ({clean.frames} frames) is longer than reverberant ({reverb.frames})")
    if clean.dims != reverb.dims:
        raise DataError(f"dimension mismatch: reverberant {reverb.dims}, clean {clean.dims}")
    return reverb.truncate(clean.frames), clean
