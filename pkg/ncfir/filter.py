"""Per-bin complex FIR filter over past and future frames.

Tap i (0-based) of a filter with causal context p and non-causal context q
multiplies X(n + q - i), so tap 0 looks q frames ahead, tap q is the current
frame and tap p + q looks p frames back. Frames outside the trajectory are zero.
"""
from dataclasses import dataclass
from typing import Union
import logging

import numpy as np

from utils.errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BinTrajectory:
    values: np.ndarray
    bin_index: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128).ravel()
        if not np.all(np.isfinite(values)):
            raise DataError(f"bin {self.bin_index}: trajectory has non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


Trajectory = Union[BinTrajectory, np.ndarray]


@dataclass(frozen=True, eq=False)
class NcFirFilter:
    g_real: np.ndarray
    g_imag: np.ndarray
    p: int
    q: int

    def __post_init__(self):
        if int(self.p) != self.p or int(self.q) != self.q or self.p < 0 or self.q < 0:
            raise DataError(f"p and q must be non-negative integers, got p={self.p}, q={self.q}")

        g_real = np.array(self.g_real, dtype=np.float64).ravel()
        g_imag = np.array(self.g_imag, dtype=np.float64).ravel()
        n_taps = self.p + self.q + 1

        if g_real.size != n_taps or g_imag.size != n_taps:
            raise DataError(
                f"filter with p={self.p}, q={self.q} needs {n_taps} taps, "
                f"got {g_real.size} real and {g_imag.size} imaginary"
            )
        if not (np.all(np.isfinite(g_real)) and np.all(np.isfinite(g_imag))):
            raise DataError("filter taps must be finite")

        g_real.setflags(write=False)
        g_imag.setflags(write=False)
        object.__setattr__(self, "g_real", g_real)
        object.__setattr__(self, "g_imag", g_imag)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))

    @classmethod
    def from_taps(cls, taps: np.ndarray, p: int, q: int) -> "NcFirFilter":
        taps = np.asarray(taps, dtype=np.complex128)
        return cls(taps.real, taps.imag, p, q)

    @classmethod
    def identity(cls, p: int = 0, q: int = 0) -> "NcFirFilter":
        taps = np.zeros(p + q + 1, dtype=np.complex128)
        taps[q] = 1.0
        return cls.from_taps(taps, p, q)

    @property
    def n_taps(self) -> int:
        return self.p + self.q + 1

    @property
    def taps(self) -> np.ndarray:
        return self.g_real + 1j * self.g_imag

    @property
    def lags(self) -> np.ndarray:
        """Frame lag of each tap, -q (future) .. p (past)."""
        return np.arange(self.n_taps) - self.q


def trajectory_values(x: Trajectory) -> np.ndarray:
    if isinstance(x, BinTrajectory):
        return x.values
    return BinTrajectory(x).values


def design_matrix(x: Trajectory, p: int, q: int, n_rows: int) -> np.ndarray:
    """Regressor matrix A with A[n, i] = X(n + q - i), zero outside the trajectory.

    :param x: the reverberant trajectory
    :param n_rows: number of output frames (the regression range)
    :return: complex matrix of shape (n_rows, p + q + 1)
    """
    values = trajectory_values(x)
    n = np.arange(n_rows)[:, None]
    i = np.arange(p + q + 1)[None, :]
    index = n + q - i

    valid = (index >= 0) & (index < values.size)
    matrix = np.zeros((n_rows, p + q + 1), dtype=np.complex128)
    matrix[valid] = values[index[valid]]
    return matrix


def apply_filter(filt: NcFirFilter, x: Trajectory, out_len: int) -> BinTrajectory:
    if out_len < 1:
        raise DataError(f"out_len must be >= 1, got {out_len}")

    bin_index = x.bin_index if isinstance(x, BinTrajectory) else 0
    estimate = design_matrix(x, filt.p, filt.q, out_len) @ filt.taps
    return BinTrajectory(estimate, bin_index=bin_index)


def prediction_error(y_hat: Trajectory, y: Trajectory) -> float:
    """Sum of squared moduli of the differences."""
    y_hat = trajectory_values(y_hat)
    y = trajectory_values(y)
    if y_hat.size != y.size:
        raise DataError(f"length mismatch: estimate has {y_hat.size} frames, reference {y.size}")
    return float(np.sum(np.abs(y_hat - y) ** 2))


def check_fit_inputs(x: Trajectory, y: Trajectory, p: int, q: int, allow_underdetermined: bool = False):
    x = trajectory_values(x)
    y = trajectory_values(y)

    if x.size == 0 or y.size == 0:
        raise DataError("empty trajectory")
    if p < 0 or q < 0:
        raise DataError(f"p and q must be non-negative, got p={p}, q={q}")
    if y.size > x.size:
        raise DataError(f"clean trajectory ({y.size} frames) is longer than reverberant ({x.size})")
    if not allow_underdetermined and p + q + 1 > y.size:
        raise DataError(f"underdetermined fit: {p + q + 1} taps but only {y.size} frames")

    return x, y


def ls_oracle(x: Trajectory, y: Trajectory, p: int, q: int) -> NcFirFilter:
    """Reference solution from the explicit design matrix and an SVD least-squares solve.

    Rank-deficient problems are logged and the minimum-norm solution is returned.
    """
    x, y = check_fit_inputs(x, y, p, q, allow_underdetermined=True)

    matrix = design_matrix(x, p, q, y.size)
    taps, _, rank, _ = np.linalg.lstsq(matrix, y, rcond=None)

    if rank < p + q + 1:
        logger.warning(f"rank-deficient design matrix: rank {rank} < {p + q + 1} taps, minimum-norm solution")

    return NcFirFilter.from_taps(taps, p, q)
