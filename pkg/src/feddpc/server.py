"""Server-side aggregation strategies.

Three strategies over the same round structure:

* ``fedavg_two_sided``  -- plain unweighted averaging of client deltas,
  with separate client and server learning rates.
* ``feddpc_noscale``    -- each delta is replaced by its component
  orthogonal to the previous aggregate update before averaging.
* ``feddpc``            -- the orthogonal residual is additionally
  rescaled by (lambda + |delta| / |residual|).

The aggregate update is the unweighted mean over participants; the global
model moves by server_lr times that mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import vecmath
from .client import LocalUpdate

STRATEGY_KINDS = ("feddpc", "feddpc_noscale", "fedavg_two_sided")


@dataclass(frozen=True)
class Strategy:
    kind: str
    lam: float = 1.0  # used by feddpc only
    eps: float = vecmath.DEFAULT_EPS

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}, expected one of {STRATEGY_KINDS}")
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")


@dataclass
class ServerState:
    global_params: np.ndarray
    prev_global_update: np.ndarray
    round: int
    server_lr: float

    @staticmethod
    def initial(global_params: np.ndarray, server_lr: float) -> "ServerState":
        # prev update starts at zero, which round one treats as degenerate
        return ServerState(
            global_params=global_params,
            prev_global_update=np.zeros_like(global_params),
            round=0,
            server_lr=server_lr,
        )


def transform_update(
    strategy: Strategy, update: LocalUpdate, prev_global_update: np.ndarray
) -> np.ndarray:
    """Apply the strategy's per-client modification to one delta."""
    if update.delta.shape != prev_global_update.shape:
        raise ValueError(
            f"dimension mismatch: {update.delta.shape[0]} vs {prev_global_update.shape[0]}"
        )
    if strategy.kind == "fedavg_two_sided":
        return update.delta
    resid = vecmath.residual(update.delta, prev_global_update, strategy.eps)
    if strategy.kind == "feddpc_noscale":
        return resid
    return vecmath.adaptive_scale(update.delta, resid, strategy.lam, strategy.eps)


def aggregate(strategy: Strategy, updates: list[LocalUpdate], state: ServerState) -> ServerState:
    """Average the transformed updates and take the global step.

    Updates are reduced in client_id order (sorted here, so the result is
    invariant to input permutation), summed sequentially for a fixed
    floating-point order, and averaged with an unweighted 1/|participants|.
    """
    if not updates:
        raise ValueError("aggregate called with an empty update set")
    d = state.global_params.shape[0]
    for u in updates:
        if u.delta.shape != (d,):
            raise ValueError(f"client {u.client_id} delta length {u.delta.shape[0]} != {d}")

    total = np.zeros(d, dtype=np.float64)
    for u in sorted(updates, key=lambda u: u.client_id):
        total += transform_update(strategy, u, state.prev_global_update)
    global_update = total / len(updates)

    return ServerState(
        global_params=state.global_params - state.server_lr * global_update,
        prev_global_update=global_update,
        round=state.round + 1,
        server_lr=state.server_lr,
    )
