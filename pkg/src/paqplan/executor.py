"""Local execution engine: shared-scan batch training and sharded gradients.

The engine stands in for a cluster at desk scale. It trains the planner's
active models, grouping those that share a feature space into one weight
matrix so each gradient iteration is a single pass over the data, and it
charges a configurable simulated scheduling delay per task so overhead
amortization is measurable: a batch executor launches one task per
iteration per group, a sequential executor one task per model per
iteration.

``partitioned_gradient`` computes per-shard partial gradients concurrently
and combines them by an ordered sum over shard index, which keeps the
result deterministic and within re-association error of the single-shard
computation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .data import Dataset, DataSplit
from .train import ModelBatch, ModelState, batch_signature, data_gradient, train_partial


class Engine:
    """Trains batches locally and accounts for simulated task overhead.

    ``sched_delay`` is seconds of scheduling overhead charged per launched
    task; it is bookkeeping only and never slept.
    """

    def __init__(self, sched_delay: float = 0.0):
        if sched_delay < 0:
            raise ValueError("sched_delay must be non-negative")
        self.sched_delay = float(sched_delay)
        self.tasks_launched = 0
        self.sim_overhead_seconds = 0.0
        self.model_iterations = 0

    def train_models(self, models: list[ModelState], split: DataSplit, iters: int,
                     batching: bool = True, kernel: str = "matrix",
                     eta_schedule=None) -> None:
        """Train every model for ``iters`` iterations, batching where possible.

        With batching on, models sharing a feature space form one batch and
        one task is charged per iteration of the group; with batching off
        every model trains alone, one task per model per iteration.
        """
        if not models:
            return
        if batching:
            groups: dict[tuple, list[ModelState]] = {}
            for m in models:
                groups.setdefault(batch_signature(m), []).append(m)
            batches = list(groups.values())
        else:
            batches = [[m] for m in models]
        for group in batches:
            train_partial(ModelBatch(group), split, iters,
                          eta_schedule=eta_schedule, kernel=kernel)
            self.tasks_launched += iters
            self.sim_overhead_seconds += iters * self.sched_delay
            self.model_iterations += iters * len(group)

    def per_model_iteration_overhead(self) -> float:
        """Simulated overhead seconds per model-iteration trained so far."""
        if self.model_iterations == 0:
            return 0.0
        return self.sim_overhead_seconds / self.model_iterations


def partitioned_gradient(shards: list[Dataset], W: np.ndarray, lam=0.0,
                         family: str = "logistic", kernel: str = "matrix",
                         max_workers: int | None = None) -> np.ndarray:
    """Data-parallel gradient over disjoint shards of the training split.

    Shard partials are computed concurrently, combined by an ordered sum
    over shard index, and the regularization term is added once at the end.
    """
    if not shards:
        raise ValueError("shard list must be non-empty")
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError("W must be a d x k matrix")

    def one(shard: Dataset) -> np.ndarray:
        return data_gradient(shard.X, shard.y.astype(float), W, family, kernel)

    if len(shards) == 1:
        partials = [one(shards[0])]
    else:
        workers = max_workers or min(len(shards), 8)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(one, shards))
    total = partials[0]
    for part in partials[1:]:
        total = total + part
    return total + np.asarray(lam, dtype=float) * W
