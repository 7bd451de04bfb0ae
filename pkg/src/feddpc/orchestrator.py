"""Round loop: sample participants, train them, aggregate, record metrics.

Rounds are strictly sequential; within a round, client training fans out
to a bounded thread pool (size from the FEDDPC_WORKERS env var, default
the machine's cpu count). Every random choice is keyed to (run_seed, round
[, client]) streams and results are reduced in client_id order, so the
trajectory is identical for any pool size.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .client import ClientConfig, LocalUpdate, local_train
from .data import ClientDataset, Dataset, PartitionSpec, dirichlet_partition
from .model import ModelSpec, evaluate, init_params
from .rng import derive_seed, stream
from .server import ServerState, Strategy, aggregate

WORKERS_ENV_VAR = "FEDDPC_WORKERS"


@dataclass(frozen=True)
class RunConfig:
    k: int
    participation_rate: float
    rounds: int
    strategy: Strategy
    client_cfg: ClientConfig
    server_lr: float
    model: ModelSpec
    partition: PartitionSpec
    run_seed: int
    eval_every: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if not (0.0 < self.participation_rate <= 1.0):
            raise ValueError(f"participation_rate must be in (0, 1], got {self.participation_rate}")
        if math.floor(self.participation_rate * self.k) < 1:
            raise ValueError(
                f"participation_rate {self.participation_rate} with k={self.k} selects no clients"
            )
        if self.server_lr <= 0:
            raise ValueError(f"server_lr must be > 0, got {self.server_lr}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.partition.k != self.k:
            raise ValueError(f"partition.k={self.partition.k} does not match k={self.k}")


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    avg_train_loss: float
    test_accuracy: float  # NaN on rounds the model was not evaluated
    test_loss: float
    participants: list[int]
    wall_ms: float


@dataclass(frozen=True)
class RunResult:
    per_round: list[RoundMetrics]
    best_accuracy: float
    best_round: int
    final_params: np.ndarray


def pool_size() -> int:
    override = os.environ.get(WORKERS_ENV_VAR, "").strip()
    if override:
        n = int(override)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV_VAR} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def sample_participants(
    k: int, rate: float, round_index: int, run_seed: int, eligible: list[int] | None = None
) -> list[int]:
    """Uniform sample without replacement of floor(rate*k) client ids, sorted.

    `eligible` restricts the pool (clients left empty by the partition are
    excluded by the caller); the sample size is clamped to the pool size.
    """
    pool = list(range(k)) if eligible is None else list(eligible)
    size = min(math.floor(rate * k), len(pool))
    rng = stream(run_seed, "participants", round_index)
    picked = rng.choice(len(pool), size=size, replace=False)
    return sorted(pool[i] for i in picked)


def _train_participants(
    cfg: RunConfig,
    params: np.ndarray,
    train: Dataset,
    clients: list[ClientDataset],
    ids: list[int],
    round_index: int,
    workers: int,
) -> list[LocalUpdate]:
    round_seed = derive_seed(cfg.run_seed, "round", round_index)

    def job(cid: int) -> LocalUpdate:
        return local_train(cfg.model, params, train, clients[cid], cfg.client_cfg, round_seed)

    if workers == 1:
        return [job(cid) for cid in ids]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, ids))


def run(cfg: RunConfig, train: Dataset, test: Dataset) -> RunResult:
    """Execute rounds 1..T and return the full metric trajectory.

    The test set is evaluated every `eval_every` rounds and always on the
    final round; other rounds carry NaN test metrics.
    """
    if cfg.model.n_features != train.n_features or cfg.model.n_classes != train.n_classes:
        raise ValueError(
            f"model spec ({cfg.model.n_features} features, {cfg.model.n_classes} classes) does not "
            f"match train data ({train.n_features} features, {train.n_classes} classes)"
        )
    if test.n_features != train.n_features:
        raise ValueError(f"test has {test.n_features} features, train has {train.n_features}")

    clients = dirichlet_partition(train, cfg.partition)
    eligible = [c.client_id for c in clients if len(c) > 0]
    workers = pool_size()

    state = ServerState.initial(init_params(cfg.model), cfg.server_lr)
    per_round: list[RoundMetrics] = []
    for t in range(1, cfg.rounds + 1):
        t0 = time.perf_counter()
        try:
            ids = sample_participants(cfg.k, cfg.participation_rate, t, cfg.run_seed, eligible)
            updates = _train_participants(cfg, state.global_params, train, clients, ids, t, workers)
            state = aggregate(cfg.strategy, updates, state)
        except Exception as exc:
            raise RuntimeError(f"round {t} failed: {exc}") from exc
        avg_train_loss = float(np.mean([u.train_loss for u in updates]))

        if t % cfg.eval_every == 0 or t == cfg.rounds:
            report = evaluate(cfg.model, state.global_params, test)
            test_accuracy, test_loss = report.accuracy, report.loss
        else:
            test_accuracy = test_loss = float("nan")
        per_round.append(
            RoundMetrics(
                round=t,
                avg_train_loss=avg_train_loss,
                test_accuracy=test_accuracy,
                test_loss=test_loss,
                participants=ids,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )

    evaluated = [m for m in per_round if not math.isnan(m.test_accuracy)]
    best = max(evaluated, key=lambda m: m.test_accuracy)
    best_round = min(m.round for m in evaluated if m.test_accuracy == best.test_accuracy)
    result = RunResult(
        per_round=per_round,
        best_accuracy=best.test_accuracy,
        best_round=best_round,
        final_params=state.global_params,
    )
    _check_metric_integrity(result)
    return result


def _check_metric_integrity(result: RunResult) -> None:
    accs = [m.test_accuracy for m in result.per_round if not math.isnan(m.test_accuracy)]
    assert result.best_accuracy == max(accs)
    earliest = next(
        m.round for m in result.per_round if m.test_accuracy == result.best_accuracy
    )
    assert result.best_round == earliest


def grid_search(
    base: RunConfig,
    train: Dataset,
    test: Dataset,
    lambdas: list[float],
    lrs: list[float],
) -> list[dict]:
    """One run per (lambda, server_lr) grid cell, sharing seed and init.

    Returns rows {lambda, lr, best_accuracy, best_round, error} sorted by
    best_accuracy descending; a failed cell is recorded with its error
    message and sorts last.
    """
    if not lambdas or not lrs:
        raise ValueError("grid_search needs nonempty lambda and lr grids")
    rows = []
    for lam in lambdas:
        for lr in lrs:
            cfg = replace(base, strategy=replace(base.strategy, lam=lam), server_lr=lr)
            row = {"lambda": lam, "lr": lr, "best_accuracy": None, "best_round": None, "error": None}
            try:
                res = run(cfg, train, test)
                row["best_accuracy"] = res.best_accuracy
                row["best_round"] = res.best_round
            except Exception as exc:
                row["error"] = str(exc)
            rows.append(row)
    rows.sort(key=lambda r: -1.0 if r["best_accuracy"] is None else r["best_accuracy"], reverse=True)
    return rows
