"""Bandit resource allocation: keep training only competitive models.

After each probation round of partial training, a model keeps its slot only
while its validation error stays within a (1 + epsilon) slack of the best
error observed so far, where the incumbent is taken over all history
including the batch under decision. Everything else is killed and receives
no further iterations; fully trained models are retired as finished.

The slack test runs on the error scale, err(m) <= (1 + epsilon) * err(best).
An alternative quality-scale rule, (1 - err(m)) * (1 + epsilon) > 1 -
err(best), is available behind ``rule="quality"``; the two are not
algebraically identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .search import History, HistoryRecord
from .train import ModelState

DEFAULT_EPSILON = 0.5
DEFAULT_PARTIAL_ITERS = 10


class InvalidModelStateError(ValueError):
    pass


@dataclass
class AllocationDecision:
    """Partition of a batch into finished, still-training, and killed."""

    finished: list[ModelState] = field(default_factory=list)
    continued: list[ModelState] = field(default_factory=list)
    killed: list[ModelState] = field(default_factory=list)


def _passes(err: float, best: float, epsilon: float, rule: str) -> bool:
    if math.isinf(epsilon):
        return True
    if rule == "error":
        return err <= (1.0 + epsilon) * best
    if rule == "quality":
        return (1.0 - err) * (1.0 + epsilon) > (1.0 - best)
    raise ValueError(f"unknown bandit rule {rule!r}")


def allocate(models: list[ModelState], history: History, epsilon: float,
             max_iterations: int, rule: str = "error") -> AllocationDecision:
    """Decide which partially trained models deserve further iterations.

    Every input model's snapshot is recorded in history before any decision
    is taken, so the incumbent reflects the current batch; the batch's own
    best model therefore always survives.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if max_iterations < 1:
        raise ValueError("max_iterations must be positive")
    for m in models:
        if m.val_error is None:
            raise InvalidModelStateError(
                f"model {m.model_id} has no validation error; train it first")
        if m.iterations_used < 1:
            raise InvalidModelStateError(
                f"model {m.model_id} has not consumed any iterations")

    for m in models:
        history.update(HistoryRecord(
            config=m.config, iterations_used=m.iterations_used,
            val_error=m.val_error, status="running", model_id=m.model_id))

    best = history.best_error()
    decision = AllocationDecision()
    for m in models:
        if m.iterations_used >= max_iterations:
            decision.finished.append(m)
            status = "finished"
        elif _passes(m.val_error, best, epsilon, rule):  # type: ignore[arg-type]
            decision.continued.append(m)
            status = "running"
        else:
            decision.killed.append(m)
            status = "killed"
        history.update(HistoryRecord(
            config=m.config, iterations_used=m.iterations_used,
            val_error=m.val_error, status=status, model_id=m.model_id))
    return decision
