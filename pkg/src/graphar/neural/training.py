"""Minibatch Adam training with chronological validation split and early
stopping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..graphs import GraphSequence
from .layers import normalize_adjacency
from .model import NgarConfig, NgarModel, backward_batch, forward_batch, loss_terms


def adam_step(
    model: NgarModel,
    grads: dict,
    learning_rate: Optional[float] = None,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> NgarModel:
    """One bias-corrected Adam update, applied in place."""
    if learning_rate is None:
        learning_rate = model.config.learning_rate
    model.step += 1
    bc1 = 1.0 - beta1**model.step
    bc2 = 1.0 - beta2**model.step
    for key, g in grads.items():
        m = model.opt_m[key]
        v = model.opt_v[key]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        model.params[key] -= (learning_rate / bc1) * m / (np.sqrt(v / bc2) + eps)
    return model


@dataclass
class TrainingHistory:
    """Per-epoch losses and the early-stopping outcome."""

    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


class _PairData:
    """Precomputed window/target tensors for a sequence, in model dtype.

    Gathered windows are time-major (k, B, ...) to match forward_batch.
    """

    def __init__(self, seq: GraphSequence, k: int, dtype):
        self.k = k
        self.x = seq.features_array().astype(dtype)
        adj = seq.adjacency_array()
        self.a_norm = normalize_adjacency(adj, dtype=dtype)
        self.a_target = adj.astype(dtype)
        self._offsets = np.arange(-k, 0)

    def gather(self, targets: np.ndarray):
        win = (targets[:, None] + self._offsets).T  # (k, B)
        return (
            self.x[win],
            self.a_norm[win],
            self.a_target[targets],
            self.x[targets],
        )


def _evaluate(model: NgarModel, data: _PairData, targets: np.ndarray, batch_size: int):
    """Mean data loss (MSE + log-loss) over the given target indices."""
    total_mse = total_bce = 0.0
    for start in range(0, len(targets), batch_size):
        idx = targets[start : start + batch_size]
        x_win, a_win, a_tgt, x_tgt = data.gather(idx)
        a_prob, x_hat, _ = forward_batch(model, x_win, a_win)
        mse, bce = loss_terms(a_prob, x_hat, a_tgt.astype(np.float64), x_tgt.astype(np.float64))
        total_mse += mse * len(idx)
        total_bce += bce * len(idx)
    n = len(targets)
    return total_mse / n, total_bce / n


def train(
    model: NgarModel,
    train_seq: GraphSequence,
    config: Optional[NgarConfig] = None,
    on_epoch=None,
) -> TrainingHistory:
    """Fit the model on a training sequence.

    Builds one (window, target) pair per valid step, holds out the final
    10% of pairs chronologically for validation, shuffles the rest each
    epoch with a seeded generator, and stops once the validation loss has
    not improved for `patience` epochs (or at max_epochs). The model is
    left holding the parameters of the best validation epoch.

    on_epoch, when given, is called after each epoch with
    (epoch_index, train_loss, val_loss).
    """
    if config is None:
        config = model.config
    k = config.window
    if len(train_seq) <= k + 10:
        raise ValueError(
            f"training sequence must be longer than window + 10 = {k + 10}, "
            f"got {len(train_seq)}"
        )
    if train_seq.n_nodes != model.n_nodes or train_seq.feature_dim != model.feature_dim:
        raise ValueError("sequence layout does not match the model")

    data = _PairData(train_seq, k, model.dtype)
    all_targets = np.arange(k, len(train_seq))
    n_val = max(1, int(0.1 * len(all_targets)))
    fit_targets = all_targets[:-n_val]
    val_targets = all_targets[-n_val:]

    rng = np.random.default_rng([config.seed, 1])
    l2 = config.l2_weight
    history = TrainingHistory()
    best_params = model.copy_params()
    since_improved = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(fit_targets)
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            x_win, a_win, a_tgt, x_tgt = data.gather(idx)
            a_prob, x_hat, cache = forward_batch(model, x_win, a_win)
            mse, bce = loss_terms(
                a_prob, x_hat, a_tgt.astype(np.float64), x_tgt.astype(np.float64)
            )
            epoch_loss += (mse + bce) * len(idx)
            grads = backward_batch(model, cache, a_prob, x_hat, a_tgt, x_tgt)
            adam_step(model, grads, config.learning_rate)
        train_loss = epoch_loss / len(order) + l2 * model.l2_penalty()

        val_mse, val_bce = _evaluate(model, data, val_targets, config.batch_size)
        val_loss = val_mse + val_bce + l2 * model.l2_penalty()
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        if on_epoch is not None:
            on_epoch(epoch, train_loss, val_loss)

        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch
            best_params = model.copy_params()
            since_improved = 0
        else:
            since_improved += 1
            if since_improved >= config.patience:
                break

    model.params = best_params
    return history
