from .model import (
    MlpModel,
    init_model,
    forward,
    mse_loss,
    loss_and_gradients,
    input_gradient,
    parameter_count,
    mlp_layer_dims,
    save_model,
    load_model,
)
from .train import TrainConfig, PairedDataset, context_pairs, evaluate, train, dereverberate_features, mlp_context_sweep
