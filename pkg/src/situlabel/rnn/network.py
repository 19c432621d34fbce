"""Multilayer recurrent classifier: cells, batch norm and a softmax head.

Batch normalization sits on the input features of every recurrent layer
(statistics over batch x time in training) and on the final hidden state
before the dense head.  The last timestep's hidden state carries the class
decision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cells import make_cell

__all__ = ["ModelSpec", "BatchNorm", "RnnModel", "softmax", "softmax_cross_entropy",
           "loss_and_grads"]

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class ModelSpec:
    """Architecture plan: cell kind per layer, width and batch-norm flag."""

    cells: tuple[str, ...] = ("gru", "gru")
    hidden: int = 64
    batch_norm: bool = True
    input_dim: int = 9
    n_classes: int = 3

    def __post_init__(self) -> None:
        if not self.cells:
            raise ValueError("need at least one recurrent layer")
        for kind in self.cells:
            if kind not in ("gru", "lstm"):
                raise ValueError(f"unknown cell kind {kind!r}")

    @property
    def name(self) -> str:
        kinds = set(self.cells)
        if kinds == {"gru"}:
            return "gru"
        if kinds == {"lstm"}:
            return "lstm"
        return "stacked"

    @classmethod
    def gru(cls, hidden: int = 64, layers: int = 2) -> "ModelSpec":
        return cls(cells=("gru",) * layers, hidden=hidden)

    @classmethod
    def lstm(cls, hidden: int = 64, layers: int = 2) -> "ModelSpec":
        return cls(cells=("lstm",) * layers, hidden=hidden)

    @classmethod
    def stacked(cls, hidden: int = 64) -> "ModelSpec":
        # the stacked variant is an LSTM layer feeding a GRU layer
        return cls(cells=("lstm", "gru"), hidden=hidden)

    @classmethod
    def by_name(cls, name: str, hidden: int = 64) -> "ModelSpec":
        if name in ("gru", "lstm"):
            return getattr(cls, name)(hidden)
        if name == "stacked":
            return cls.stacked(hidden)
        raise ValueError(f"unknown model name {name!r}")

    def to_dict(self) -> dict:
        return {
            "cells": list(self.cells),
            "hidden": self.hidden,
            "batch_norm": self.batch_norm,
            "input_dim": self.input_dim,
            "n_classes": self.n_classes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            cells=tuple(d["cells"]),
            hidden=int(d["hidden"]),
            batch_norm=bool(d["batch_norm"]),
            input_dim=int(d["input_dim"]),
            n_classes=int(d["n_classes"]),
        )


class BatchNorm:
    """Feature-wise batch normalization with running statistics for inference."""

    def __init__(self, dim: int, dtype=np.float64):
        self.dim = dim
        self.params = {
            "gamma": np.ones(dim, dtype=dtype),
            "beta": np.zeros(dim, dtype=dtype),
        }
        self.running_mean = np.zeros(dim, dtype=dtype)
        self.running_var = np.ones(dim, dtype=dtype)

    def forward(self, x: np.ndarray, train: bool) -> tuple[np.ndarray, tuple | None]:
        gamma, beta = self.params["gamma"], self.params["beta"]
        if train:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (x - mean) * inv_std
            self.running_mean = BN_MOMENTUM * self.running_mean + (1 - BN_MOMENTUM) * mean
            self.running_var = BN_MOMENTUM * self.running_var + (1 - BN_MOMENTUM) * var
            return xhat * gamma + beta, (xhat, inv_std)
        inv_std = 1.0 / np.sqrt(self.running_var + BN_EPS)
        xhat = (x - self.running_mean) * inv_std
        return xhat * gamma + beta, None

    def backward(self, cache: tuple, dy: np.ndarray) -> tuple[np.ndarray, dict]:
        xhat, inv_std = cache
        n = xhat.shape[0]
        dgamma = np.sum(dy * xhat, axis=0)
        dbeta = np.sum(dy, axis=0)
        dxhat = dy * self.params["gamma"]
        dx = (inv_std / n) * (
            n * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0)
        )
        return dx, {"gamma": dgamma, "beta": dbeta}


class RnnModel:
    """Recurrent layers with per-layer input batch norm and a softmax head."""

    def __init__(self, spec: ModelSpec, seed: int = 0, dtype=np.float64):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.layers: list[tuple[BatchNorm | None, object]] = []
        in_dim = spec.input_dim
        for kind in spec.cells:
            bn = BatchNorm(in_dim, dtype) if spec.batch_norm else None
            cell = make_cell(kind, in_dim, spec.hidden, rng, dtype)
            self.layers.append((bn, cell))
            in_dim = spec.hidden
        self.head_bn = BatchNorm(in_dim, dtype) if spec.batch_norm else None
        limit = np.sqrt(6.0 / (in_dim + spec.n_classes))
        self.head = {
            "w": rng.uniform(-limit, limit, size=(in_dim, spec.n_classes)).astype(dtype),
            "b": np.zeros(spec.n_classes, dtype=dtype),
        }

    def parameters(self) -> dict[str, np.ndarray]:
        """All trainable arrays keyed by a stable dotted name."""
        out: dict[str, np.ndarray] = {}
        for i, (bn, cell) in enumerate(self.layers):
            if bn is not None:
                for k, v in bn.params.items():
                    out[f"layer{i}.bn.{k}"] = v
            for k, v in cell.params.items():
                out[f"layer{i}.cell.{k}"] = v
        if self.head_bn is not None:
            for k, v in self.head_bn.params.items():
                out[f"head.bn.{k}"] = v
        for k, v in self.head.items():
            out[f"head.{k}"] = v
        return out

    def set_parameters(self, values: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        for name, value in values.items():
            params[name][...] = value

    def forward(self, x: np.ndarray, train: bool = False) -> tuple[np.ndarray, tuple]:
        """(B, T, input_dim) batch-major input -> (B, n_classes) logits."""
        if x.ndim != 3 or x.shape[2] != self.spec.input_dim:
            raise ValueError(f"expected (B, T, {self.spec.input_dim}) input, got {x.shape}")
        a = np.ascontiguousarray(np.transpose(x, (1, 0, 2)), dtype=self.dtype)
        T, B, _ = a.shape
        layer_caches = []
        for bn, cell in self.layers:
            if bn is not None:
                flat, bn_cache = bn.forward(a.reshape(T * B, -1), train)
                a = flat.reshape(T, B, -1)
            else:
                bn_cache = None
            a, cell_cache = cell.forward(a)
            layer_caches.append((bn_cache, cell_cache))
        h_last = a[-1]
        if self.head_bn is not None:
            g, head_bn_cache = self.head_bn.forward(h_last, train)
        else:
            g, head_bn_cache = h_last, None
        logits = g @ self.head["w"] + self.head["b"]
        return logits, (layer_caches, head_bn_cache, g, (T, B))

    def backward(self, cache: tuple, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        layer_caches, head_bn_cache, g, (T, B) = cache
        grads: dict[str, np.ndarray] = {}
        grads["head.w"] = g.T @ dlogits
        grads["head.b"] = dlogits.sum(axis=0)
        dg = dlogits @ self.head["w"].T
        if self.head_bn is not None:
            dh_last, bn_grads = self.head_bn.backward(head_bn_cache, dg)
            grads["head.bn.gamma"] = bn_grads["gamma"]
            grads["head.bn.beta"] = bn_grads["beta"]
        else:
            dh_last = dg
        da = np.zeros((T, B, self.spec.hidden), dtype=self.dtype)
        da[-1] = dh_last
        for i in range(len(self.layers) - 1, -1, -1):
            bn, cell = self.layers[i]
            bn_cache, cell_cache = layer_caches[i]
            dz, cell_grads = cell.backward(cell_cache, da)
            for k, v in cell_grads.items():
                grads[f"layer{i}.cell.{k}"] = v
            if bn is not None:
                dflat, bn_grads = bn.backward(bn_cache, dz.reshape(T * B, -1))
                grads[f"layer{i}.bn.gamma"] = bn_grads["gamma"]
                grads[f"layer{i}.bn.beta"] = bn_grads["beta"]
                da = dflat.reshape(dz.shape)
            else:
                da = dz
        return grads

    def recalibrate_batchnorm(self, x: np.ndarray) -> None:
        """Replace batch-norm running statistics with exact activation moments.

        The EMA statistics trail the weight updates of the final epochs; one
        deterministic pass with frozen weights removes the train/infer gap.
        No-op for models built without batch norm.
        """
        if not self.spec.batch_norm:
            return
        a = np.ascontiguousarray(np.transpose(x, (1, 0, 2)), dtype=self.dtype)
        T, B, _ = a.shape
        for bn, cell in self.layers:
            flat = a.reshape(T * B, -1)
            bn.running_mean = flat.mean(axis=0)
            bn.running_var = flat.var(axis=0)
            normed, _ = bn.forward(flat, train=False)
            a, _ = cell.forward(normed.reshape(T, B, -1))
        h_last = a[-1]
        self.head_bn.running_mean = h_last.mean(axis=0)
        self.head_bn.running_var = h_last.var(axis=0)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(x, train=False)
        return softmax(logits)

    def predict(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(x, train=False)
        return np.argmax(logits, axis=1)

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Parameters plus batch-norm running statistics, for checkpointing."""
        out = dict(self.parameters())
        for i, (bn, _) in enumerate(self.layers):
            if bn is not None:
                out[f"layer{i}.bn.running_mean"] = bn.running_mean
                out[f"layer{i}.bn.running_var"] = bn.running_var
        if self.head_bn is not None:
            out["head.bn.running_mean"] = self.head_bn.running_mean
            out["head.bn.running_var"] = self.head_bn.running_var
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, value in arrays.items():
            if name.endswith("running_mean") or name.endswith("running_var"):
                obj = self.head_bn if name.startswith("head") else self.layers[
                    int(name.split(".")[0].removeprefix("layer"))][0]
                if obj is None:
                    raise ValueError(f"checkpoint has {name} but model lacks batch norm")
                setattr(obj, name.rsplit(".", 1)[1], np.array(value, dtype=self.dtype))
            else:
                self.parameters()[name][...] = value


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray
                          ) -> tuple[float, np.ndarray]:
    """Mean cross-entropy loss and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    probs = softmax(logits)
    eps = np.finfo(logits.dtype).tiny
    loss = float(-np.mean(np.log(probs[np.arange(n), labels] + eps)))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits


def loss_and_grads(model: RnnModel, x: np.ndarray, labels: np.ndarray,
                   train: bool = True) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    """Forward + full backpropagation through time over every timestep."""
    logits, cache = model.forward(x, train=train)
    loss, dlogits = softmax_cross_entropy(logits, labels)
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite training loss")
    grads = model.backward(cache, dlogits.astype(model.dtype))
    return loss, grads, logits
