"""Mini-batch SGD with a newbob learning-rate schedule."""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from features.context import align_pairs, stack_context
from features.mel import LogMelSeq
from mlp.model import MlpModel, DESK_HIDDEN, N_HIDDEN, forward, init_model, loss_and_gradients, mlp_layer_dims, mse_loss
from utils.errors import ConfigError, DataError, NumericalError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["epoch", "train_mse", "valid_mse", "lr"]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    batch_size: int = 200
    epochs: int = 50
    newbob_threshold: float = 0.001
    max_halvings: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 1 or self.max_halvings < 1:
            raise ConfigError("batch_size, epochs and max_halvings must be positive")
        if self.newbob_threshold < 0:
            raise ConfigError(f"newbob_threshold must be >= 0, got {self.newbob_threshold}")


@dataclass(frozen=True, eq=False)
class PairedDataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.targets.ndim != 2 or len(self.inputs) != len(self.targets):
            raise DataError(f"inputs {self.inputs.shape} and targets {self.targets.shape} aren't paired rows")

    def __len__(self):
        return len(self.inputs)

    @classmethod
    def concat(cls, datasets: Sequence["PairedDataset"]) -> "PairedDataset":
        if not datasets:
            raise DataError("no datasets to concatenate")
        return cls(
            np.concatenate([d.inputs for d in datasets]),
            np.concatenate([d.targets for d in datasets]),
        )


def context_pairs(reverb: LogMelSeq, clean: LogMelSeq, p: int, q: int) -> PairedDataset:
    """Context-stacked reverberant frames paired with the aligned clean frames."""
    reverb, clean = align_pairs(reverb, clean)
    return PairedDataset(stack_context(reverb, p, q).values, clean.values)


def evaluate(model: MlpModel, dataset: PairedDataset) -> float:
    return mse_loss(forward(model, dataset.inputs), dataset.targets)


def train(
    model: MlpModel,
    dataset: PairedDataset,
    config: TrainConfig,
    valid: Optional[PairedDataset] = None,
) -> Tuple[MlpModel, pd.DataFrame]:
    """Train a copy of ``model``, returning the best-validation parameters and the loss trace.

    The learning rate is halved whenever the validation MSE improves by less than
    ``newbob_threshold`` (relative) over the previous epoch; training stops after
    ``max_halvings`` consecutive halvings. Without ``valid`` the training set is used.
    """
    if len(dataset) == 0:
        raise DataError("empty training set")
    if valid is None:
        valid = dataset
    elif len(valid) == 0:
        raise DataError("empty validation set")

    rng = np.random.default_rng(config.seed)
    model = model.copy()
    lr = config.learning_rate

    best_model, best_loss = model.copy(), evaluate(model, valid)
    previous = best_loss
    halvings = 0
    rows: List[dict] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(dataset))

        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grads_w, grads_b = loss_and_gradients(model, dataset.inputs[batch], dataset.targets[batch])
            for w, b, gw, gb in zip(model.weights, model.biases, grads_w, grads_b):
                w -= lr * gw
                b -= lr * gb

        train_mse = evaluate(model, dataset)
        valid_mse = evaluate(model, valid)
        rows.append({"epoch": epoch, "train_mse": train_mse, "valid_mse": valid_mse, "lr": lr})

        if not (np.isfinite(train_mse) and np.isfinite(valid_mse)):
            trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
            logger.error(f"Training diverged, loss trace:\n{trace.to_string(index=False)}")
            error = NumericalError(f"training diverged at epoch {epoch} (lr {lr:g})")
            error.trace = trace
            raise error

        logger.debug(f"epoch {epoch}: train {train_mse:.6f}, valid {valid_mse:.6f}, lr {lr:g}")

        if valid_mse < best_loss:
            best_model, best_loss = model.copy(), valid_mse

        improvement = (previous - valid_mse) / previous if previous > 0 else 0.0
        if improvement < config.newbob_threshold:
            halvings += 1
            lr /= 2
            logger.info(f"epoch {epoch}: validation improved {improvement:.4%}, halving lr to {lr:g}")
            if halvings >= config.max_halvings:
                break
        else:
            halvings = 0
        previous = valid_mse

    logger.info(f"Trained {len(rows)} epochs, best validation MSE {best_loss:.6f}")
    return best_model, pd.DataFrame(rows, columns=TRACE_COLUMNS)


def dereverberate_features(model: MlpModel, reverb: LogMelSeq, p: int, q: int) -> LogMelSeq:
    context = stack_context(reverb, p, q)
    if context.values.shape[1] != model.input_dim:
        raise DataError(
            f"context p={p}, q={q} gives {context.values.shape[1]} inputs, model expects {model.input_dim}"
        )
    return LogMelSeq(forward(model, context.values))


def mlp_context_sweep(
    train_pairs: Sequence[Tuple[LogMelSeq, LogMelSeq]],
    valid_pairs: Sequence[Tuple[LogMelSeq, LogMelSeq]],
    grid: Sequence[Tuple[int, int]],
    config: TrainConfig,
    hidden: int = DESK_HIDDEN,
    n_hidden: int = N_HIDDEN,
) -> pd.DataFrame:
    """Train one model per (p, q) and report its held-out MSE.

    :param train_pairs: (reverberant, clean) sequences used for training
    :param valid_pairs: held-out (reverberant, clean) sequences
    """
    if not train_pairs or not valid_pairs:
        raise DataError("context sweep needs training and held-out utterances")
    if not grid:
        raise DataError("empty (p, q) grid")

    rows = []
    for p, q in grid:
        train_set = PairedDataset.concat([context_pairs(r, c, p, q) for r, c in train_pairs])
        valid_set = PairedDataset.concat([context_pairs(r, c, p, q) for r, c in valid_pairs])

        dims = mlp_layer_dims(train_set.inputs.shape[1], train_set.targets.shape[1], hidden, n_hidden)
        model, _ = train(init_model(dims, config.seed), train_set, config, valid_set)

        context = p + q
        rows.append({
            "p": p,
            "q": q,
            "taps": context + 1,
            "ratio_percent": 100.0 * p / context if context else 100.0,
            "valid_mse": evaluate(model, valid_set),
        })
        logger.info(f"MLP context p={p}, q={q}: held-out MSE {rows[-1]['valid_mse']:.6f}")

    return pd.DataFrame(rows)
