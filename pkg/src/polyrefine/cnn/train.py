"""Adam training loop with validation-based early stopping."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .data import batch_arrays
from .layers import softmax_cross_entropy
from .network import Network


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 30
    patience: int = 3  # consecutive worse-than-best validation checks
    seed: int = 0
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)


@dataclass
class AdamState:
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, config: TrainConfig) -> None:
    """One in-place Adam update with bias correction."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.eps)


def compute_gradients(net: Network, batch, dtype=np.float64) -> tuple[float, list[np.ndarray]]:
    """Mean batch cross-entropy and its gradient for every parameter."""
    if not batch:
        raise ValueError("empty batch")
    x, y = batch_arrays(batch)
    logits = net.forward_logits(x.astype(dtype), train=True)
    loss, dlogits = softmax_cross_entropy(logits, y)
    net.backward_from_logits(dlogits)
    return loss, net.gradients()


def evaluate(net: Network, data, batch_size: int = 256, dtype=np.float32) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) of the network on a labeled set."""
    total_loss = 0.0
    correct = 0
    for start in range(0, len(data), batch_size):
        chunk = data[start : start + batch_size]
        x, y = batch_arrays(chunk)
        logits = net.forward_logits(x.astype(dtype), train=False)
        loss, _ = softmax_cross_entropy(logits, y)
        total_loss += loss * len(chunk)
        correct += int((logits.argmax(axis=1) == y.argmax(axis=1)).sum())
    return total_loss / len(data), correct / len(data)


def _calibration_images(train_data, limit: int = 2048) -> np.ndarray:
    take = train_data[: min(len(train_data), limit)]
    return np.stack([s.image.pixels for s in take]).astype(np.float32)[..., None]


def train(net: Network, train_data, val_data, config: TrainConfig) -> dict:
    """Minibatch Adam (float32 arithmetic, float64 parameters).

    After every epoch the batch-norm running statistics are recomputed
    exactly on (a slice of) the training data before the validation check;
    training stops when validation loss worsens `patience` times in a row
    and the best snapshot is restored."""
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_params(net.parameters())
    history = {"epoch": [], "train_loss": [], "val_loss": [], "val_accuracy": []}
    best_val = np.inf
    best_snapshot = None
    bad_checks = 0
    calib = _calibration_images(train_data)
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_data))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [train_data[i] for i in order[start : start + config.batch_size]]
            loss, grads = compute_gradients(net, batch, dtype=np.float32)
            adam_step(net.parameters(), grads, state, config)
            epoch_loss += loss * len(batch)
        epoch_loss /= len(train_data)
        net.refresh_norm_stats(calib)
        val_loss, val_acc = evaluate(net, val_data) if val_data else (epoch_loss, 0.0)
        history["epoch"].append(epoch)
        history["train_loss"].append(epoch_loss)
        history["val_loss"].append(val_loss)
        history["val_accuracy"].append(val_acc)
        if val_loss < best_val:
            best_val = val_loss
            best_snapshot = [p.copy() for p in net.parameters()] + [
                copy.deepcopy((l.running_mean, l.running_var))
                for l in net.layers
                if hasattr(l, "running_mean")
            ]
            bad_checks = 0
        else:
            bad_checks += 1
            if bad_checks >= config.patience:
                break
    if best_snapshot is not None:
        params = net.parameters()
        for p, saved in zip(params, best_snapshot[: len(params)]):
            p[...] = saved
        norm_layers = [l for l in net.layers if hasattr(l, "running_mean")]
        for layer, (rm, rv) in zip(norm_layers, best_snapshot[len(params) :]):
            layer.running_mean = np.array(rm, dtype=np.float64)
            layer.running_var = np.array(rv, dtype=np.float64)
    return history


def confusion_matrix(net: Network, testset) -> np.ndarray:
    """counts[true, predicted] over the test set."""
    ell = net.n_classes
    counts = np.zeros((ell, ell), dtype=int)
    for start in range(0, len(testset), 256):
        chunk = testset[start : start + 256]
        x, y = batch_arrays(chunk)
        pred = net.forward_logits(x.astype(np.float32), train=False).argmax(axis=1)
        true = y.argmax(axis=1)
        for t, p in zip(true, pred):
            counts[t, p] += 1
    return counts


def accuracy(cm: np.ndarray) -> float:
    return float(np.trace(cm) / cm.sum())
