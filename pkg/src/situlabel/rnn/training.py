"""Training recipe: Adam, gradient clipping, k-fold loop and checkpoints.

Each fold fits its own normalization statistics on the training split,
trains with seeded mini-batch shuffles, and leaves its out-of-fold
predictions behind so the comparison statistics can align instances across
models.  Everything is deterministic under the master seed.
"""

from __future__ import annotations

import contextlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None

from ..dataset import FoldPlan, NormStats, Window, stack_windows, stratified_kfold
from .network import ModelSpec, RnnModel, loss_and_grads

__all__ = [
    "TrainConfig",
    "TrainingDiverged",
    "Adam",
    "clip_grad_norm",
    "FoldResult",
    "TrainHistory",
    "train",
    "train_arrays",
    "evaluate",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = "SITULABEL-RNN"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Training recipe: learning rate, batching, epochs and fold count."""

    learning_rate: float = 0.0025
    batch_size: int = 32
    epochs: int = 10
    folds: int = 10
    seed: int = 0
    optimizer: str = "adam"
    clip_norm: float | None = 5.0
    lr_decay: float = 0.0  # per-epoch multiplicative decay; 0 = constant rate
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if min(self.learning_rate, self.batch_size, self.epochs, self.folds) <= 0:
            raise ValueError("learning rate, batch size, epochs and folds must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "folds": self.folds,
            "seed": self.seed,
            "optimizer": self.optimizer,
            "clip_norm": self.clip_norm,
            "lr_decay": self.lr_decay,
            "dtype": self.dtype,
        }


class TrainingDiverged(RuntimeError):
    """Raised when a fold hits a non-finite loss; names the offending batch."""


class Adam:
    """Adam with bias correction (beta1 0.9, beta2 0.999)."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


class Sgd:
    def __init__(self, params: dict[str, np.ndarray], lr: float):
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for k, p in params.items():
            p -= self.lr * grads[k]


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2))
                              for g in grads.values())))
    if total > max_norm > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


@dataclass
class FoldResult:
    fold: int
    test_indices: np.ndarray
    predictions: np.ndarray
    test_accuracy: float
    epoch_loss: list[float]
    epoch_accuracy: list[float]
    epoch_seconds: list[float]
    norm_stats: NormStats
    model: RnnModel | None = None


@dataclass
class TrainHistory:
    """Per-fold curves plus aligned out-of-fold predictions."""

    spec: ModelSpec
    config: TrainConfig
    plan: FoldPlan
    folds: list[FoldResult] = field(default_factory=list)

    @property
    def fold_accuracies(self) -> list[float]:
        return [f.test_accuracy for f in self.folds]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.fold_accuracies))

    def oof_predictions(self, n: int) -> np.ndarray:
        """Out-of-fold predictions, one per window, aligned to window order."""
        out = np.full(n, -1, dtype=int)
        for f in self.folds:
            out[f.test_indices] = f.predictions
        if np.any(out < 0):
            raise AssertionError("fold plan did not cover every window")
        return out


def _fold_seeds(master: int, k: int) -> list[int]:
    ss = np.random.SeedSequence(master)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(k)]


def _single_threaded_blas():
    # the recurrent gemms are too small for BLAS threading to pay off
    if threadpool_limits is None:
        return contextlib.nullcontext()
    return threadpool_limits(limits=1)


def train_fold(
    x: np.ndarray,
    y: np.ndarray,
    plan: FoldPlan,
    fold: int,
    spec: ModelSpec,
    config: TrainConfig,
    fold_seed: int,
    keep_model: bool = True,
) -> FoldResult:
    """Train one fold: fit norm stats on the train split, fit, then test."""
    dtype = np.dtype(config.dtype)
    train_idx = plan.train_indices(fold)
    test_idx = plan.test_indices(fold)
    flat = x[train_idx].reshape(-1, x.shape[-1])
    stats = NormStats(
        mean=flat.mean(axis=0), std=np.maximum(flat.std(axis=0), 1e-6)
    )
    x_train = stats.transform(x[train_idx]).astype(dtype)
    y_train = y[train_idx]
    x_test = stats.transform(x[test_idx]).astype(dtype)

    model = RnnModel(spec, seed=fold_seed, dtype=dtype)
    params = model.parameters()
    if config.optimizer == "adam":
        opt = Adam(params, config.learning_rate)
    else:
        opt = Sgd(params, config.learning_rate)
    rng = np.random.default_rng(fold_seed)

    n = len(train_idx)
    epoch_loss: list[float] = []
    epoch_accuracy: list[float] = []
    epoch_seconds: list[float] = []
    for epoch in range(config.epochs):
        if config.lr_decay > 0:
            opt.lr = config.learning_rate / (1.0 + config.lr_decay * epoch)
        order = rng.permutation(n)
        t_start = time.perf_counter()
        total_loss = 0.0
        total_correct = 0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            try:
                loss, grads, logits = loss_and_grads(model, x_train[batch], y_train[batch])
            except FloatingPointError:
                raise TrainingDiverged(
                    f"non-finite loss in fold {fold}, epoch {epoch}, "
                    f"batch starting at {start}"
                ) from None
            if config.clip_norm:
                clip_grad_norm(grads, config.clip_norm)
            opt.step(params, grads)
            total_loss += loss * len(batch)
            total_correct += int(np.sum(np.argmax(logits, axis=1) == y_train[batch]))
        epoch_seconds.append(time.perf_counter() - t_start)
        epoch_loss.append(total_loss / n)
        epoch_accuracy.append(total_correct / n)

    model.recalibrate_batchnorm(x_train)
    preds = model.predict(x_test)
    accuracy = float(np.mean(preds == y[test_idx])) if len(test_idx) else 0.0
    return FoldResult(
        fold=fold,
        test_indices=test_idx,
        predictions=preds,
        test_accuracy=accuracy,
        epoch_loss=epoch_loss,
        epoch_accuracy=epoch_accuracy,
        epoch_seconds=epoch_seconds,
        norm_stats=stats,
        model=model if keep_model else None,
    )


def train_arrays(
    x: np.ndarray,
    y: np.ndarray,
    spec: ModelSpec,
    config: TrainConfig,
    plan: FoldPlan,
    keep_models: bool = False,
) -> TrainHistory:
    history = TrainHistory(spec=spec, config=config, plan=plan)
    seeds = _fold_seeds(config.seed, plan.k)
    with _single_threaded_blas():
        for fold in range(plan.k):
            history.folds.append(
                train_fold(x, y, plan, fold, spec, config, seeds[fold],
                           keep_model=keep_models)
            )
    return history


def train(
    windows: Sequence[Window],
    spec: ModelSpec,
    config: TrainConfig,
    plan: FoldPlan | None = None,
    keep_models: bool = False,
) -> TrainHistory:
    """Cross-validated training over labelled windows."""
    if plan is None:
        plan = stratified_kfold(windows, config.folds, config.seed)
    x, y = stack_windows(windows)
    return train_arrays(x, y, spec, config, plan, keep_models=keep_models)


def evaluate(model: RnnModel, windows: Sequence[Window] | np.ndarray,
             norm_stats: NormStats, labels: np.ndarray | None = None
             ) -> tuple[float, np.ndarray]:
    """Accuracy (fraction of argmax hits) and per-window predictions."""
    if isinstance(windows, np.ndarray):
        x = windows
        y = labels
    else:
        x, y = stack_windows(windows)
    preds = model.predict(norm_stats.transform(x).astype(model.dtype))
    if y is None or len(y) == 0:
        return 0.0, preds
    return float(np.mean(preds == y)), preds


def save_checkpoint(path: str | Path, model: RnnModel, norm_stats: NormStats,
                    config: TrainConfig) -> None:
    """Write a versioned npz container with spec, stats and parameters."""
    meta = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "spec": model.spec.to_dict(),
        "dtype": str(model.dtype),
        "norm": norm_stats.to_dict(),
        "train_config": config.to_dict(),
    }
    arrays = {f"arr::{k}": v for k, v in model.state_arrays().items()}
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 **arrays)


def load_checkpoint(path: str | Path) -> tuple[RnnModel, NormStats, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("magic") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a model checkpoint")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        spec = ModelSpec.from_dict(meta["spec"])
        model = RnnModel(spec, seed=0, dtype=np.dtype(meta["dtype"]))
        arrays = {k.removeprefix("arr::"): data[k] for k in data.files if k != "meta"}
        model.load_state_arrays(arrays)
    return model, NormStats.from_dict(meta["norm"]), meta["train_config"]
