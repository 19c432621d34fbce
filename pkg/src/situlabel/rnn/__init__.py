"""From-scratch recurrent classifiers (GRU, LSTM, stacked) with BPTT."""

from .cells import GruCell, LstmCell, make_cell
from .network import (
    BatchNorm,
    ModelSpec,
    RnnModel,
    loss_and_grads,
    softmax,
    softmax_cross_entropy,
)
from .training import (
    Adam,
    FoldResult,
    TrainConfig,
    TrainHistory,
    TrainingDiverged,
    clip_grad_norm,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
    train_arrays,
    train_fold,
)

__all__ = [
    "GruCell",
    "LstmCell",
    "make_cell",
    "BatchNorm",
    "ModelSpec",
    "RnnModel",
    "loss_and_grads",
    "softmax",
    "softmax_cross_entropy",
    "Adam",
    "FoldResult",
    "TrainConfig",
    "TrainHistory",
    "TrainingDiverged",
    "clip_grad_norm",
    "evaluate",
    "load_checkpoint",
    "save_checkpoint",
    "train",
    "train_arrays",
    "train_fold",
]
