"""Spectrogram-level filtering: one independent filter per frequency bin."""
from dataclasses import dataclass
from functools import partial
from typing import List, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from dsp.stft import ComplexSpectrogram
from ncfir.filter import NcFirFilter, apply_filter, prediction_error
from ncfir.normal_system import Ridge, fit_filter
from utils.errors import DataError, DerevError
from utils.parallel import map_ordered

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["p", "q", "taps", "ratio_percent", "mean_err", "utterance_count"]


@dataclass(frozen=True)
class SpectrogramPair:
    utterance_id: str
    reverb: ComplexSpectrogram
    clean: ComplexSpectrogram


def _check_pair(x: ComplexSpectrogram, y: ComplexSpectrogram):
    if x.bins != y.bins:
        raise DataError(f"bin count mismatch: reverberant {x.bins}, clean {y.bins}")
    if y.frames > x.frames:
        raise DataError(f"clean spectrogram ({y.frames} frames) is longer than reverberant ({x.frames})")


def _fit_bin(k: int, x: ComplexSpectrogram, y: ComplexSpectrogram, p: int, q: int, ridge: Ridge):
    try:
        x_k = x.trajectory(k)
        y_k = y.trajectory(k)
        filt = fit_filter(x_k, y_k, p, q, ridge)
        y_hat = apply_filter(filt, x_k, y.frames)
        return filt, y_hat.values, prediction_error(y_hat, y_k)
    except DerevError as e:
        # same exception type, with the bin attached
        raise type(e)(f"bin {k}: {e}") from e


def dereverberate_spectrogram(
    x: ComplexSpectrogram,
    y: ComplexSpectrogram,
    p: int,
    q: int,
    ridge: Ridge = "auto",
    jobs: int = 1,
) -> Tuple[ComplexSpectrogram, List[NcFirFilter], np.ndarray]:
    """Fit and apply one filter per bin, in-sample.

    :param x: reverberant spectrogram
    :param y: clean spectrogram, no longer than ``x``
    :return: (estimate with y.frames frames, filter per bin, error per bin)
    """
    _check_pair(x, y)

    fit = partial(_fit_bin, x=x, y=y, p=p, q=q, ridge=ridge)
    results = map_ordered(fit, range(x.bins), jobs)

    filters = [filt for filt, _, _ in results]
    estimate = np.column_stack([values for _, values, _ in results])
    errors = np.array([err for _, _, err in results])

    logger.debug(f"p={p}, q={q}: total error {errors.sum():.6g} over {x.bins} bins")
    return y.with_values(estimate), filters, errors


def _utterance_errors(pair: SpectrogramPair, grid: Sequence[Tuple[int, int]], ridge: Ridge) -> List[dict]:
    clean_energy = float(np.sum(np.abs(pair.clean.values) ** 2))
    if clean_energy == 0:
        raise DataError(f"{pair.utterance_id}: clean spectrogram has zero energy")

    rows = []
    for p, q in grid:
        _, _, errors = dereverberate_spectrogram(pair.reverb, pair.clean, p, q, ridge)
        rows.append({"utterance_id": pair.utterance_id, "p": p, "q": q, "err": errors.sum() / clean_energy})
    return rows


def _check_grid(grid: Sequence[Tuple[int, int]]):
    if not grid:
        raise DataError("empty (p, q) grid")
    for p, q in grid:
        if p < 0 or q < 0:
            raise DataError(f"grid entry {(p, q)} has a negative context")


def context_sweep_errors(
    corpus: Sequence[SpectrogramPair],
    grid: Sequence[Tuple[int, int]],
    ridge: Ridge = "auto",
    jobs: int = 1,
) -> pd.DataFrame:
    """Normalised error E / sum|Y|^2 for every utterance and every (p, q)."""
    if not corpus:
        raise DataError("empty corpus")
    _check_grid(grid)

    grid = [(int(p), int(q)) for p, q in grid]
    per_utterance = map_ordered(partial(_utterance_errors, grid=grid, ridge=ridge), corpus, jobs)

    table = pd.DataFrame([row for rows in per_utterance for row in rows])
    return table.sort_values(["p", "q", "utterance_id"], kind="stable").reset_index(drop=True)


def summarize_sweep(errors: pd.DataFrame) -> pd.DataFrame:
    """Mean normalised error per (p, q) from the per-utterance table.

    ratio_percent is the causal share 100*p/(p+q); the (0, 0) filter counts as causal.
    """
    table = errors.groupby(["p", "q"], sort=True).agg(
        mean_err=("err", "mean"), utterance_count=("utterance_id", "nunique")
    ).reset_index()
    table["taps"] = table["p"] + table["q"] + 1

    context = table["p"] + table["q"]
    table["ratio_percent"] = np.where(context > 0, 100.0 * table["p"] / context.where(context > 0, 1), 100.0)

    logger.info(f"Context sweep: {len(table)} (p, q) cells over {errors['utterance_id'].nunique()} utterances")
    return table[SWEEP_COLUMNS]


def context_sweep(
    corpus: Sequence[SpectrogramPair],
    grid: Sequence[Tuple[int, int]],
    ridge: Ridge = "auto",
    jobs: int = 1,
) -> pd.DataFrame:
    return summarize_sweep(context_sweep_errors(corpus, grid, ridge, jobs))


def fixed_tap_slice(table: pd.DataFrame, taps: int) -> pd.DataFrame:
    """Rows with a fixed number of free parameters, ordered by causal share."""
    rows = table[table["taps"] == taps]
    if rows.empty:
        raise DataError(f"sweep table has no rows with {taps} taps")
    return rows.sort_values("ratio_percent", kind="stable").reset_index(drop=True)


def filters_to_frame(filters: Sequence[NcFirFilter]) -> pd.DataFrame:
    """One row per (bin, tap), tap_index running from -q to p."""
    frames = [
        pd.DataFrame({"bin": k, "tap_index": filt.lags, "g_real": filt.g_real, "g_imag": filt.g_imag})
        for k, filt in enumerate(filters)
    ]
    if not frames:
        return pd.DataFrame(columns=["bin", "tap_index", "g_real", "g_imag"])
    return pd.concat(frames, ignore_index=True)
