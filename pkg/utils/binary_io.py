"""Little-endian binary dumps used between pipeline stages.

NCSP: magic, u32 frames, u32 bins, frames*bins interleaved (re, im) f32, row-major.
NCFT: magic, u32 rows, u32 cols, rows*cols f32, row-major.
NCIR: magic, u32 taps, taps f32, then a ``key=value`` text block (utf-8).
"""
from pathlib import Path
from typing import Dict, Tuple
import logging
import struct

import numpy as np

from utils.errors import DataError

logger = logging.getLogger(__name__)

SPECTROGRAM_MAGIC = b"NCSP"
FEATURE_MAGIC = b"NCFT"
RIR_MAGIC = b"NCIR"

_HEADER = struct.Struct("<4sII")


def _read_bytes(path: Path, magic: bytes) -> bytes:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"Couldn't read {path}: {e}") from e

    if blob[:4] != magic:
        raise DataError(f"{path} is not a {magic.decode()} file (magic {blob[:4]!r})")

    return blob


def _write_bytes(path: Path, blob: bytes):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(blob)
    except OSError as e:
        raise DataError(f"Couldn't write {path}: {e}") from e
    logger.debug(f"Wrote {path} ({len(blob)} bytes)")


def write_spectrogram(path: Path, values: np.ndarray):
    values = np.asarray(values)
    if values.ndim != 2:
        raise DataError(f"spectrogram must be 2-D, got shape {values.shape}")

    n_frames, n_bins = values.shape
    interleaved = np.empty((n_frames, n_bins, 2), dtype="<f4")
    interleaved[..., 0] = values.real
    interleaved[..., 1] = values.imag

    _write_bytes(path, _HEADER.pack(SPECTROGRAM_MAGIC, n_frames, n_bins) + interleaved.tobytes())


def read_spectrogram(path: Path) -> np.ndarray:
    blob = _read_bytes(path, SPECTROGRAM_MAGIC)
    _, n_frames, n_bins = _HEADER.unpack_from(blob)

    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    if data.size != n_frames * n_bins * 2:
        raise DataError(f"{path}: truncated spectrogram, expected {n_frames}x{n_bins}")

    data = data.reshape(n_frames, n_bins, 2).astype(np.float64)
    return data[..., 0] + 1j * data[..., 1]


def write_features(path: Path, values: np.ndarray):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise DataError(f"feature matrix must be 2-D, got shape {values.shape}")

    rows, cols = values.shape
    _write_bytes(path, _HEADER.pack(FEATURE_MAGIC, rows, cols) + values.astype("<f4").tobytes())


def read_features(path: Path) -> np.ndarray:
    blob = _read_bytes(path, FEATURE_MAGIC)
    _, rows, cols = _HEADER.unpack_from(blob)

    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    if data.size != rows * cols:
        raise DataError(f"{path}: truncated feature matrix, expected {rows}x{cols}")

    return data.reshape(rows, cols).astype(np.float64)


def write_rir(path: Path, taps: np.ndarray, meta: Dict[str, str]):
    taps = np.asarray(taps, dtype="<f4").ravel()
    header = struct.pack("<4sI", RIR_MAGIC, taps.size)
    text = "".join(f"{key}={value}\n" for key, value in meta.items())

    _write_bytes(path, header + taps.tobytes() + text.encode("utf-8"))


def read_rir(path: Path) -> Tuple[np.ndarray, Dict[str, str]]:
    blob = _read_bytes(path, RIR_MAGIC)
    (n_taps,) = struct.unpack_from("<I", blob, 4)

    end = 8 + 4 * n_taps
    if len(blob) < end:
        raise DataError(f"{path}: truncated RIR, expected {n_taps} taps")

    taps = np.frombuffer(blob, dtype="<f4", count=n_taps, offset=8).astype(np.float64)

    meta = {}
    for line in blob[end:].decode("utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()

    return taps, meta
