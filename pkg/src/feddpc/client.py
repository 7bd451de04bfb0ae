"""One client's local training for a communication round.

A client starts from the broadcast global model, runs minibatch SGD over
its own samples, and reports the weight change divided by the local
learning rate (so the update is in gradient units), together with the
average pre-step minibatch loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ClientDataset, Dataset
from .model import ModelSpec, loss_and_grad
from .rng import stream


@dataclass(frozen=True)
class ClientConfig:
    local_lr: float
    batch_size: int = 32
    local_epochs: int = 1

    def __post_init__(self):
        if self.local_lr <= 0:
            raise ValueError(f"local_lr must be > 0, got {self.local_lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.local_epochs < 1:
            raise ValueError(f"local_epochs must be >= 1, got {self.local_epochs}")


@dataclass(frozen=True)
class LocalUpdate:
    client_id: int
    delta: np.ndarray  # gradient-scale units: (w_before - w_after) / local_lr
    n_samples: int
    train_loss: float


def local_train(
    spec: ModelSpec,
    global_params: np.ndarray,
    train_data: Dataset,
    client: ClientDataset,
    cfg: ClientConfig,
    round_seed: int,
) -> LocalUpdate:
    """Run `local_epochs` of shuffled minibatch SGD and emit the scaled delta.

    Per epoch the client's samples are reshuffled (stream keyed by
    round_seed and client_id) and split into ceil(n/batch) minibatches, the
    last possibly partial. Each minibatch takes one plain SGD step. The
    reported loss is the mean of pre-step minibatch losses over the round.
    """
    n = len(client)
    if n == 0:
        raise ValueError(f"client {client.client_id} has no samples")
    x = train_data.features[client.sample_indices]
    y = train_data.labels[client.sample_indices]

    rng = stream(round_seed, "shuffle", client.client_id)
    w = global_params.copy()
    losses = []
    for _ in range(cfg.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            loss, grad = loss_and_grad(spec, w, (x[rows], y[rows]))
            losses.append(loss)
            w = w - cfg.local_lr * grad

    delta = (global_params - w) / cfg.local_lr
    if not np.all(np.isfinite(delta)):
        raise ArithmeticError(f"client {client.client_id} produced a non-finite update")
    return LocalUpdate(
        client_id=client.client_id,
        delta=delta,
        n_samples=n,
        train_loss=float(np.mean(losses)),
    )
