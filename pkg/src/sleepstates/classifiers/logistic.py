"""Class-weighted logistic regression fitted by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import TrainConfig, check_columns, class_weights


@dataclass(frozen=True, eq=False)
class LogisticModel:
    columns: tuple[str, ...]
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray
    loss_history: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": "logistic",
            "columns": list(self.columns),
            "weights": self.weights.tolist(),
            "bias": float(self.bias),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(
            tuple(d["columns"]),
            np.asarray(d["weights"], dtype=np.float64),
            float(d["bias"]),
            np.asarray(d["mean"], dtype=np.float64),
            np.asarray(d["std"], dtype=np.float64),
        )


def sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, sample_weight: np.ndarray
) -> tuple[float, np.ndarray, float]:
    """Mean weighted binary cross-entropy and its gradient in (w, b)."""
    z = X @ w + b
    # log(1 + e^z) - y z, written to stay finite for large |z|
    loss = float(np.mean(sample_weight * (np.logaddexp(0.0, z) - y * z)))
    r = sample_weight * (sigmoid(z) - y) / len(y)
    return loss, X.T @ r, float(r.sum())


def normalization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def train_logistic(X: np.ndarray, y: np.ndarray, columns, cfg: TrainConfig = TrainConfig()) -> LogisticModel:
    """Fit on raw features ``X``; z-scoring is learned here and stored in the model.

    A step that raises the loss is rejected and the learning rate halved, so
    the recorded loss never increases.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)} labels")
    if len(y) == 0:
        raise ValueError("no training rows")
    w0, w1 = class_weights(y, cfg)
    sw = np.where(y > 0.5, w1, w0)
    mean, std = normalization(X)
    Xn = (X - mean) / std

    w = np.zeros(X.shape[1])
    b = 0.0
    lr = cfg.learning_rate
    loss, gw, gb = loss_and_grad(w, b, Xn, y, sw)
    history = [loss]
    for _ in range(cfg.epochs):
        while True:
            w_new, b_new = w - lr * gw, b - lr * gb
            new_loss, new_gw, new_gb = loss_and_grad(w_new, b_new, Xn, y, sw)
            if new_loss <= loss or lr < 1e-12:
                break
            lr /= 2
        if new_loss > loss:
            break
        w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
        history.append(loss)
    return LogisticModel(tuple(columns), w, b, mean, std, tuple(history))


def predict_proba_logistic(model: LogisticModel, X: np.ndarray, columns) -> np.ndarray:
    idx = check_columns(model.columns, list(columns))
    X = np.asarray(X, dtype=np.float64)[:, idx]
    z = ((X - model.mean) / model.std) @ model.weights + model.bias
    eps = np.finfo(np.float64).eps
    return np.clip(sigmoid(z), eps, 1.0 - eps)
