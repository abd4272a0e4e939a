"""Feedforward spectral mapper: sigmoid hidden layers, linear output."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple
import base64
import json
import logging

import numpy as np
from scipy.special import expit

from utils.errors import DataError

logger = logging.getLogger(__name__)

FULL_HIDDEN = 1000
DESK_HIDDEN = 128
N_HIDDEN = 3


@dataclass(eq=False)
class MlpModel:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    seed: Optional[int] = None
    layer_dims: List[int] = field(init=False)

    def __post_init__(self):
        if not self.weights or len(self.weights) != len(self.biases):
            raise DataError(f"need matching weight and bias lists, got {len(self.weights)} and {len(self.biases)}")

        dims = [self.weights[0].shape[0]]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or w.shape[0] != dims[-1] or b.shape != (w.shape[1],):
                raise DataError(f"layer {i}: weight {w.shape} and bias {b.shape} don't chain from {dims[-1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DataError(f"layer {i}: parameters must be finite")
            dims.append(w.shape[1])
        self.layer_dims = dims

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.seed)


def mlp_layer_dims(input_dim: int, output_dim: int, hidden: int = DESK_HIDDEN, n_hidden: int = N_HIDDEN) -> List[int]:
    return [input_dim] + [hidden] * n_hidden + [output_dim]


def init_model(layer_dims: Sequence[int], seed: int) -> MlpModel:
    """Weights ~ U(-s, s) with s = sqrt(6 / (fan_in + fan_out)), zero biases."""
    layer_dims = [int(d) for d in layer_dims]
    if len(layer_dims) < 2 or min(layer_dims) < 1:
        raise DataError(f"invalid layer dims {layer_dims}")

    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))

    return MlpModel(weights, biases, seed)


def parameter_count(model: MlpModel) -> int:
    return int(sum(w.size + b.size for w, b in zip(model.weights, model.biases)))


def _check_input(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise DataError(f"input has {x.shape[-1]} dims, model expects {model.input_dim}")
    return x


def _forward_pass(model: MlpModel, x: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
    activations = [x]
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = activations[-1] @ w + b
        if i == last:
            return activations, z
        activations.append(expit(z))


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Map one input vector, or a batch of rows, to output estimates."""
    x = _check_input(model, x)
    _, out = _forward_pass(model, np.atleast_2d(x))
    return out[0] if x.ndim == 1 else out


def mse_loss(outputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean over the batch and output dimensions of squared differences."""
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if outputs.shape != targets.shape:
        raise DataError(f"shape mismatch: outputs {outputs.shape}, targets {targets.shape}")
    if outputs.size == 0:
        raise DataError("empty batch")
    return float(np.mean((outputs - targets) ** 2))


def _backward_pass(model: MlpModel, activations: List[np.ndarray], delta: np.ndarray):
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)

    for i in reversed(range(len(model.weights))):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        delta = delta @ model.weights[i].T
        if i > 0:
            a = activations[i]
            delta = delta * a * (1 - a)

    # delta is now the gradient with respect to the input
    return grads_w, grads_b, delta


def loss_and_gradients(model: MlpModel, x: np.ndarray, targets: np.ndarray):
    """MSE of a batch and its gradients with respect to every weight and bias.

    :return: (loss, weight gradients, bias gradients), lists ordered like the layers
    """
    x = np.atleast_2d(_check_input(model, x))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))

    activations, out = _forward_pass(model, x)
    loss = mse_loss(out, targets)

    grads_w, grads_b, _ = _backward_pass(model, activations, 2 * (out - targets) / out.size)
    return loss, grads_w, grads_b


def input_gradient(model: MlpModel, x: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Gradient of the batch MSE with respect to the inputs."""
    x_in = _check_input(model, x)
    x = np.atleast_2d(x_in)
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))

    activations, out = _forward_pass(model, x)
    if out.shape != targets.shape:
        raise DataError(f"shape mismatch: outputs {out.shape}, targets {targets.shape}")

    _, _, grad = _backward_pass(model, activations, 2 * (out - targets) / out.size)
    return grad[0] if x_in.ndim == 1 else grad


def _encode(block: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(block, dtype="<f4").tobytes()).decode("ascii")


def _decode(text: str, shape: Tuple[int, ...]) -> np.ndarray:
    data = np.frombuffer(base64.b64decode(text), dtype="<f4").astype(np.float64)
    if data.size != int(np.prod(shape)):
        raise DataError(f"parameter block has {data.size} values, expected shape {shape}")
    return data.reshape(shape)


def save_model(model: MlpModel, path: Path):
    """JSON with layer dims, seed and base64 little-endian f32 parameter blocks."""
    document = {
        "layer_dims": model.layer_dims,
        "seed": model.seed,
        "hidden_activation": "sigmoid",
        "output_activation": "identity",
        "weights": [_encode(w) for w in model.weights],
        "biases": [_encode(b) for b in model.biases],
    }

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(document, indent=2, sort_keys=True))
    except OSError as e:
        raise DataError(f"Couldn't write model {path}: {e}") from e
    logger.info(f"Saved model {model.layer_dims} to {path}")


def load_model(path: Path) -> MlpModel:
    try:
        document = json.loads(Path(path).read_text())
        dims = document["layer_dims"]
        weights = [_decode(text, (i, o)) for text, i, o in zip(document["weights"], dims[:-1], dims[1:])]
        biases = [_decode(text, (o,)) for text, o in zip(document["biases"], dims[1:])]
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise DataError(f"Couldn't load model {path}: {e}") from e

    return MlpModel(weights, biases, document.get("seed"))
