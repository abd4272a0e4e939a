from pathlib import Path
from typing import Union
import logging

import numpy as np
import pandas as pd

from dsp.stft import ComplexSpectrogram
from features.mel import LogMelSeq
from utils.errors import DataError

logger = logging.getLogger(__name__)

EXPORT_FORMATS = ("csv", "pgm")
DB_FLOOR = 1e-10


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, ComplexSpectrogram):
        return 20 * np.log10(np.maximum(np.abs(data.values), DB_FLOOR))
    if isinstance(data, LogMelSeq):
        return data.values
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2:
        raise DataError(f"expected a frames x bins matrix, got shape {matrix.shape}")
    return matrix


def to_graymap(matrix: np.ndarray) -> np.ndarray:
    """Min-max scale to 0..255, low bins at the bottom, frames left to right."""
    lo, hi = float(matrix.min()), float(matrix.max())
    if hi > lo:
        scaled = np.round(255 * (matrix - lo) / (hi - lo))
    else:
        scaled = np.full(matrix.shape, 128.0)
    return scaled.T[::-1].astype(np.uint8)


def export_spectrogram(data: Union[ComplexSpectrogram, LogMelSeq, np.ndarray], path: Path, fmt: str = "csv"):
    """
    Write a spectrogram (dB magnitudes) or log-energy matrix as CSV or a binary P5 graymap
    :param data: ComplexSpectrogram, LogMelSeq or a frames x bins array
    :param path: output file
    :param fmt: "csv" or "pgm"
    :return:
    """
    if fmt not in EXPORT_FORMATS:
        raise DataError(f"unknown export format '{fmt}', expected one of {EXPORT_FORMATS}")

    matrix = _as_matrix(data)
    if matrix.size == 0 or not np.all(np.isfinite(matrix)):
        raise DataError("nothing finite to export")

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            pd.DataFrame(matrix).to_csv(path, index=False, header=False)
        else:
            image = to_graymap(matrix)
            height, width = image.shape
            path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + image.tobytes())
    except OSError as e:
        raise DataError(f"Couldn't write {path}: {e}") from e

    logger.info(f"Exported {matrix.shape[0]}x{matrix.shape[1]} matrix to {path}")
