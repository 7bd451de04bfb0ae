"""Deterministic single-process federated learning simulator.

Implements the feddpc aggregation strategy (orthogonal projection of
client updates onto the previous aggregate update plus adaptive residual
scaling) and its ablations, with Dirichlet-heterogeneous client
partitions, partial participation, and a reproducible experiment harness.
"""

from .client import ClientConfig, LocalUpdate, local_train
from .data import (
    ClientDataset,
    Dataset,
    PartitionSpec,
    dirichlet_partition,
    dirichlet_proportions,
    load_idx,
    save_partition,
    synth_classification,
)
from .model import LossReport, ModelSpec, evaluate, init_params, loss_and_grad, param_dim
from .orchestrator import (
    RoundMetrics,
    RunConfig,
    RunResult,
    grid_search,
    run,
    sample_participants,
)
from .server import ServerState, Strategy, aggregate, transform_update
from .vecmath import adaptive_scale, dot, norm, project, residual

__all__ = [
    "ClientConfig",
    "ClientDataset",
    "Dataset",
    "LocalUpdate",
    "LossReport",
    "ModelSpec",
    "PartitionSpec",
    "RoundMetrics",
    "RunConfig",
    "RunResult",
    "ServerState",
    "Strategy",
    "adaptive_scale",
    "aggregate",
    "dirichlet_partition",
    "dirichlet_proportions",
    "dot",
    "evaluate",
    "grid_search",
    "init_params",
    "load_idx",
    "local_train",
    "loss_and_grad",
    "norm",
    "param_dim",
    "project",
    "residual",
    "run",
    "sample_participants",
    "save_partition",
    "synth_classification",
    "transform_update",
]
