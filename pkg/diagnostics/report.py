from typing import Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from features.mel import LogMelSeq
from utils.errors import DataError

logger = logging.getLogger(__name__)

CORPUS_ROW = "corpus_mean"


def mse_report(pairs: Sequence[Tuple[str, LogMelSeq, LogMelSeq]]) -> pd.DataFrame:
    """
    Per-utterance MSE of (utterance_id, estimate, reference) triples, sorted by id,
    followed by a corpus_mean row averaging the utterance rows
    :param pairs:
    :return: DataFrame with columns utterance_id, n_frames, mse
    """
    if not pairs:
        raise DataError("no pairs to report")

    rows = []
    for utterance_id, estimate, reference in pairs:
        if estimate.values.shape != reference.values.shape:
            raise DataError(
                f"{utterance_id}: estimate {estimate.values.shape} and reference {reference.values.shape} misaligned"
            )
        mse = float(np.mean((estimate.values - reference.values) ** 2))
        rows.append({"utterance_id": utterance_id, "n_frames": estimate.frames, "mse": mse})

    table = pd.DataFrame(rows).sort_values("utterance_id", kind="stable").reset_index(drop=True)
    mean_row = {"utterance_id": CORPUS_ROW, "n_frames": int(table["n_frames"].sum()), "mse": table["mse"].mean()}

    logger.info(f"Corpus MSE {mean_row['mse']:.6f} over {len(table)} utterances")
    return pd.concat([table, pd.DataFrame([mean_row])], ignore_index=True)
