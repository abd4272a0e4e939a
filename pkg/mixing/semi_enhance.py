"""Semi-enhanced features: convex mixes of a reverberant or reference-enhanced
stream with a dereverberated stream, and the search for the mixing weight.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
import logging
import math

import numpy as np
import pandas as pd

from features.mel import LogMelSeq
from utils.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

STREAMS = ("reverb", "ref_enhanced", "derev_of_reverb", "derev_of_ref_enhanced")

# (first, second): output = (1 - lambda) * first + lambda * second
CONFIG_STREAMS: Dict[int, Tuple[str, str]] = {
    1: ("ref_enhanced", "derev_of_reverb"),
    2: ("ref_enhanced", "derev_of_ref_enhanced"),
    3: ("reverb", "derev_of_ref_enhanced"),
    4: ("reverb", "derev_of_reverb"),
}

# average weights found by word-error-rate tuning of an MLP mapper, for comparison only
WER_TUNED_LAMBDA = {1: 0.3, 2: 0.363, 3: 0.425, 4: 0.425}

DEFAULT_GRID = tuple(np.round(np.linspace(0.0, 1.0, 21), 10))
TIE_RTOL = 1e-9

RT60_BANDS = (
    ("rt60_low", 0.4, 0.8),
    ("rt60_mid", 0.8, 1.2),
    ("rt60_high", 1.2, 2.0),
)


@dataclass(frozen=True)
class MixConfig:
    config_id: int
    lam: float = 0.0

    def __post_init__(self):
        if self.config_id not in CONFIG_STREAMS:
            raise ConfigError(f"config_id must be one of {sorted(CONFIG_STREAMS)}, got {self.config_id}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")

    @property
    def streams(self) -> Tuple[str, str]:
        return CONFIG_STREAMS[self.config_id]


@dataclass(frozen=True)
class MixUtterance:
    utterance_id: str
    subset: str
    clean: LogMelSeq
    streams: Mapping[str, LogMelSeq] = field(default_factory=dict)


@dataclass(frozen=True)
class SweepResult:
    optima: Dict[str, float]
    average_lambda: float
    table: pd.DataFrame
    summary: pd.DataFrame


def _stream_pair(config: MixConfig, streams: Mapping[str, LogMelSeq]) -> Tuple[np.ndarray, np.ndarray]:
    first_name, second_name = config.streams
    missing = [name for name in (first_name, second_name) if name not in streams]
    if missing:
        raise DataError(f"config {config.config_id} needs streams {config.streams}, missing {missing}")

    first, second = streams[first_name].values, streams[second_name].values
    if first.shape != second.shape:
        raise DataError(f"stream shapes differ: {first_name} {first.shape}, {second_name} {second.shape}")
    return first, second


def _mix(first: np.ndarray, second: np.ndarray, lam: float) -> np.ndarray:
    if lam == 0.0:
        return first
    if lam == 1.0:
        return second
    return (1.0 - lam) * first + lam * second


def semi_enhance(config: MixConfig, streams: Mapping[str, LogMelSeq]) -> LogMelSeq:
    """(1 - lambda) * first + lambda * second, with the config's two streams."""
    first, second = _stream_pair(config, streams)
    return LogMelSeq(_mix(first, second, config.lam))


def rt60_subset(rt60: float) -> str:
    for name, low, high in RT60_BANDS:
        if low <= rt60 < high or (name == RT60_BANDS[-1][0] and rt60 == high):
            return name
    raise DataError(f"rt60 {rt60:.3f} s is outside every subset band")


def _subset_mse(config_id: int, utterances: Sequence[MixUtterance], lam: float) -> float:
    """Frame-pooled MSE to the clean references over a whole subset."""
    config = MixConfig(config_id, lam)
    total, count = 0.0, 0
    for utt in utterances:
        first, second = _stream_pair(config, utt.streams)
        if first.shape != utt.clean.values.shape:
            raise DataError(f"{utt.utterance_id}: streams {first.shape} and clean {utt.clean.values.shape} differ")
        total += float(np.sum((_mix(first, second, lam) - utt.clean.values) ** 2))
        count += first.size
    return total / count


def _argmin_with_ties(grid: Sequence[float], metric: Sequence[float]) -> int:
    """First grid index within a relative tolerance of the minimum."""
    metric = np.asarray(metric)
    best = metric.min()
    return int(np.flatnonzero(metric <= best + TIE_RTOL * abs(best))[0])


def lambda_sweep(
    config_id: int,
    utterances: Sequence[MixUtterance],
    grid: Optional[Sequence[float]] = None,
) -> SweepResult:
    """Tune lambda per subset by MSE to the clean features.

    :param config_id: which pair of streams is mixed
    :param utterances: dev utterances, each tagged with its subset
    :param grid: candidate lambdas, default 0, 0.05, ..., 1
    :return: per-subset optimum (ties go to the smaller lambda), the average
        optimum and the full metric table
    """
    grid = sorted(float(lam) for lam in (DEFAULT_GRID if grid is None else grid))
    if not grid:
        raise ConfigError("empty lambda grid")
    for lam in grid:
        MixConfig(config_id, lam)

    subsets: Dict[str, List[MixUtterance]] = {}
    for utt in sorted(utterances, key=lambda u: u.utterance_id):
        subsets.setdefault(utt.subset, []).append(utt)
    if not subsets:
        raise DataError("no dev utterances to tune lambda on")

    rows, optima = [], {}
    for subset in sorted(subsets):
        members = subsets[subset]
        if not members:
            raise DataError(f"subset {subset} is empty")

        metric = [_subset_mse(config_id, members, lam) for lam in grid]
        rows.extend({"subset": subset, "config": config_id, "lambda": lam, "mse": mse} for lam, mse in zip(grid, metric))

        optima[subset] = grid[_argmin_with_ties(grid, metric)]
        logger.info(f"config {config_id}, {subset}: optimal lambda {optima[subset]:g} over {len(members)} utterances")

    average = math.fsum(optima.values()) / len(optima)

    summary_rows = []
    for subset in sorted(subsets):
        summary_rows.append({
            "subset": subset,
            "config": config_id,
            "optimal_lambda": optima[subset],
            "mse_at_optimum": _subset_mse(config_id, subsets[subset], optima[subset]),
            "mse_at_average": _subset_mse(config_id, subsets[subset], average),
            "utterance_count": len(subsets[subset]),
        })
    summary = pd.DataFrame(summary_rows)
    average_row = {
        "subset": "average",
        "config": config_id,
        "optimal_lambda": average,
        "mse_at_optimum": summary["mse_at_optimum"].mean(),
        "mse_at_average": summary["mse_at_average"].mean(),
        "utterance_count": int(summary["utterance_count"].sum()),
    }
    summary = pd.concat([summary, pd.DataFrame([average_row])], ignore_index=True)
    summary["wer_tuned_lambda"] = np.where(summary["subset"] == "average", WER_TUNED_LAMBDA[config_id], np.nan)

    return SweepResult(optima, average, pd.DataFrame(rows), summary)
