"""Normal equations of the per-bin complex least-squares filter.

With A the regressor matrix of X, A_r/A_j its real/imaginary parts and
M_ab = A_a^T A_b, R_XaYb = A_a^T Y_b, zeroing the gradient of
E = |A g - Y|^2 over g = g_r + j g_j gives

    (M_rr + M_jj) g_r - (M_rj - M_jr) g_j = R_XrYr + R_XjYj
    (M_jr - M_rj) g_r - (M_rr + M_jj) g_j = R_XjYr - R_XrYj

which is solved as one stacked real system of size 2(p+q+1).
"""
from dataclasses import dataclass, fields
from typing import Union
import logging

import numpy as np
from scipy import linalg

from ncfir.filter import NcFirFilter, Trajectory, check_fit_inputs, design_matrix
from utils.errors import DataError, NumericalError

logger = logging.getLogger(__name__)

AUTO_RIDGE_SCALE = 1e-8
# "auto" leaves systems up to this condition number unloaded
AUTO_COND_LIMIT = 1e8
SINGULAR_COND = 1e13
Ridge = Union[float, str]


@dataclass(frozen=True, eq=False)
class NormalSystem:
    M_rr: np.ndarray
    M_jj: np.ndarray
    M_rj: np.ndarray
    M_jr: np.ndarray
    R_XrYr: np.ndarray
    R_XjYj: np.ndarray
    R_XrYj: np.ndarray
    R_XjYr: np.ndarray
    p: int
    q: int

    def __post_init__(self):
        n_taps = self.p + self.q + 1
        for f in fields(self):
            if f.name in ("p", "q"):
                continue
            value = getattr(self, f.name)
            expected = (n_taps, n_taps) if f.name.startswith("M") else (n_taps,)
            if value.shape != expected:
                raise DataError(f"{f.name} has shape {value.shape}, expected {expected}")
            if not np.all(np.isfinite(value)):
                raise NumericalError(f"{f.name} has non-finite entries")

    def __add__(self, other: "NormalSystem") -> "NormalSystem":
        """Pool the normal equations of two utterances for one shared filter."""
        if (self.p, self.q) != (other.p, other.q):
            raise DataError(f"can't pool systems with contexts {(self.p, self.q)} and {(other.p, other.q)}")
        summed = {
            f.name: getattr(self, f.name) + getattr(other, f.name)
            for f in fields(self)
            if f.name not in ("p", "q")
        }
        return NormalSystem(**summed, p=self.p, q=self.q)

    @property
    def n_taps(self) -> int:
        return self.p + self.q + 1

    def stacked(self):
        """The real system S [g_r; g_j] = b, S symmetric positive semi-definite."""
        P = self.M_rr + self.M_jj
        Q = self.M_rj - self.M_jr
        matrix = np.block([[P, -Q], [Q, P]])
        rhs = np.concatenate([self.R_XrYr + self.R_XjYj, self.R_XrYj - self.R_XjYr])
        return matrix, rhs


def build_normal_system(x: Trajectory, y: Trajectory, p: int, q: int) -> NormalSystem:
    """Correlation matrices and vectors over the regression range n = 1..N_c.

    :param x: reverberant trajectory, zero-padded outside its support
    :param y: clean trajectory of length N_c <= len(x)
    """
    x, y = check_fit_inputs(x, y, p, q)

    matrix = design_matrix(x, p, q, y.size)
    a_r, a_j = matrix.real, matrix.imag

    return NormalSystem(
        M_rr=a_r.T @ a_r,
        M_jj=a_j.T @ a_j,
        M_rj=a_r.T @ a_j,
        M_jr=a_j.T @ a_r,
        R_XrYr=a_r.T @ y.real,
        R_XjYj=a_j.T @ y.imag,
        R_XrYj=a_r.T @ y.imag,
        R_XjYr=a_j.T @ y.real,
        p=p,
        q=q,
    )


def resolve_ridge(system: NormalSystem, ridge: Ridge) -> float:
    if ridge == "auto":
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(system.stacked()[0])
        if np.isfinite(cond) and cond <= AUTO_COND_LIMIT:
            return 0.0
        trace = float(np.trace(system.M_rr + system.M_jj))
        # an all-zero trajectory still gets a tiny floor and solves to the zero filter
        return max(AUTO_RIDGE_SCALE * trace / system.n_taps, np.finfo(float).tiny)

    ridge = float(ridge)
    if ridge < 0:
        raise DataError(f"ridge must be >= 0 or 'auto', got {ridge}")
    return ridge


def solve_normal_system(system: NormalSystem, ridge: Ridge = 0.0) -> NcFirFilter:
    matrix, rhs = system.stacked()
    ridge = resolve_ridge(system, ridge)
    matrix = matrix + ridge * np.eye(matrix.shape[0])

    if ridge == 0:
        cond = np.linalg.cond(matrix)
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise NumericalError(f"singular normal equations (condition {cond:.3g}); supply ridge")

    try:
        solution = linalg.solve(matrix, rhs, assume_a="pos")
    except linalg.LinAlgError as e:
        raise NumericalError(f"singular normal equations; supply ridge ({e})") from e

    n_taps = system.n_taps
    return NcFirFilter(solution[:n_taps], solution[n_taps:], system.p, system.q)


def fit_filter(x: Trajectory, y: Trajectory, p: int, q: int, ridge: Ridge = 0.0) -> NcFirFilter:
    """Filter minimising sum_n |Y_hat(n) - Y(n)|^2 over n = 1..N_c.

    :param x: reverberant trajectory
    :param y: clean trajectory
    :param p: causal context in frames
    :param q: non-causal context in frames
    :param ridge: diagonal loading, or "auto": none for a well-conditioned system,
        otherwise 1e-8 * trace(M_rr + M_jj) / (p + q + 1)
    :return: the fitted NcFirFilter
    """
    return solve_normal_system(build_normal_system(x, y, p, q), ridge)


def closed_form_solve(system: NormalSystem) -> NcFirFilter:
    """Eliminate g_j and g_r from the two block equations separately.

    With P = M_rr + M_jj, Q = M_rj - M_jr, a = R_XrYr + R_XjYj and
    b = R_XjYr - R_XrYj:

        (P^-1 Q + Q^-1 P) g_r = Q^-1 a - P^-1 b
        (P^-1 Q + Q^-1 P) g_j = -Q^-1 b - P^-1 a

    Needs P and Q invertible. Q is antisymmetric, so it is singular for an odd
    number of taps and for real trajectories; use solve_normal_system there.
    """
    P = system.M_rr + system.M_jj
    Q = system.M_rj - system.M_jr
    a = system.R_XrYr + system.R_XjYj
    b = system.R_XjYr - system.R_XrYj

    for name, matrix in (("M_rr + M_jj", P), ("M_rj - M_jr", Q)):
        cond = np.linalg.cond(matrix)
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise NumericalError(f"closed form needs {name} invertible (condition {cond:.3g})")

    P_inv_Q = np.linalg.solve(P, Q)
    Q_inv_P = np.linalg.solve(Q, P)
    K = P_inv_Q + Q_inv_P

    P_inv_a, P_inv_b = np.linalg.solve(P, np.column_stack([a, b])).T
    Q_inv_a, Q_inv_b = np.linalg.solve(Q, np.column_stack([a, b])).T

    try:
        g_r = np.linalg.solve(K, Q_inv_a - P_inv_b)
        g_j = np.linalg.solve(K, -Q_inv_b - P_inv_a)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"closed form intermediate matrix is singular ({e})") from e

    return NcFirFilter(g_r, g_j, system.p, system.q)
