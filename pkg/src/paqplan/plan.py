"""The two planning procedures.

``baseline_plan`` is conventional sequential grid search: every grid point
is trained to completion, one model at a time.

``tupaq_plan`` is the optimized loop: it keeps up to ``batch_size`` models
in flight, tops up free slots with strategy proposals, trains all active
models together for ``partial_iters`` iterations per pass, then lets the
bandit rule retire finished models and kill uncompetitive ones. The budget
is counted in model-iterations (one full scan of the training data by one
model), so the two planners are comparable at
``budget = models x max_iterations``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .bandit import allocate
from .data import DataSplit
from .executor import Engine
from .search import History, HistoryRecord
from .space import SearchSpace, grid_points
from .train import ModelState, make_model


@dataclass
class Budget:
    """Remaining training allowance in model-iterations; never negative."""

    remaining: int

    def __post_init__(self) -> None:
        if self.remaining < 0:
            raise ValueError("budget must be non-negative")

    @classmethod
    def from_models(cls, models: int, max_iterations: int) -> "Budget":
        return cls(models * max_iterations)

    def spend(self, amount: int) -> None:
        self.remaining = max(0, self.remaining - amount)


@dataclass(eq=False)
class PlanResult:
    best: ModelState | None
    history: History
    scans_used: int
    wall_seconds: float
    best_finished: bool
    knobs: dict = field(default_factory=dict)


def baseline_plan(split: DataSplit, space: SearchSpace, budget_models: int,
                  max_iterations: int = 100, *, kernel: str = "matrix",
                  base_seed: int = 0, default_family: str = "logistic",
                  engine: Engine | None = None) -> PlanResult:
    """Sequential grid search: train every grid point to completion."""
    if budget_models < 1:
        raise ValueError("budget_models must be at least 1")
    points = grid_points(space, budget_models)
    engine = engine or Engine()
    history = History()
    best: ModelState | None = None
    scans = 0
    start = time.perf_counter()
    for i, cfg in enumerate(points):
        model = make_model(cfg, split.train.dim, base_seed, default_family, model_id=i)
        engine.train_models([model], split, max_iterations,
                            batching=False, kernel=kernel)
        scans += max_iterations
        history.update(HistoryRecord(
            config=cfg, iterations_used=model.iterations_used,
            val_error=model.val_error, status="finished", model_id=i))
        if best is None or (model.val_error or 1.0) < (best.val_error or 1.0):
            best = model
    return PlanResult(best=best, history=history, scans_used=scans,
                      wall_seconds=time.perf_counter() - start, best_finished=True,
                      knobs={"planner": "baseline", "budget_models": budget_models,
                             "max_iterations": max_iterations})


def tupaq_plan(split: DataSplit, space: SearchSpace, budget: Budget | int, strategy, *,
               partial_iters: int = 10, batch_size: int = 10, epsilon: float = 0.5,
               max_iterations: int = 100, bandit: bool = True, batching: bool = True,
               bandit_rule: str = "error", kernel: str = "matrix", eta_schedule=None,
               base_seed: int = 0, default_family: str = "logistic",
               engine: Engine | None = None) -> PlanResult:
    """Batched, bandit-pruned model search under a model-iteration budget.

    The loop ends when the budget is spent or the strategy is exhausted
    with no models left in flight. If the remaining budget cannot cover a
    full pass, one truncated pass of ``min(partial_iters, remaining //
    active)`` iterations runs and the plan stops. When no model ever
    finishes, the best partially trained model is returned with
    ``best_finished=False``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    if partial_iters < 1:
        raise ValueError("partial_iters must be at least 1")
    if max_iterations % partial_iters != 0:
        raise ValueError("partial_iters must divide max_iterations")
    b = budget if isinstance(budget, Budget) else Budget(int(budget))
    engine = engine or Engine()

    history = History()
    models_by_id: dict[int, ModelState] = {}
    active: list[ModelState] = []
    best: ModelState | None = None
    next_id = 0
    scans = 0
    truncated = False
    start = time.perf_counter()

    while b.remaining > 0:
        free = batch_size - len(active)
        if free > 0 and not strategy.exhausted:
            for cfg in strategy.propose(free, space, history):
                model = make_model(cfg, split.train.dim, base_seed,
                                   default_family, model_id=next_id)
                next_id += 1
                models_by_id[model.model_id] = model
                active.append(model)
        if not active:
            break
        step = partial_iters
        if b.remaining < len(active) * partial_iters:
            step = min(partial_iters, max(1, b.remaining // len(active)))
            truncated = True
        engine.train_models(active, split, step, batching=batching,
                            kernel=kernel, eta_schedule=eta_schedule)
        b.spend(len(active) * step)
        scans += len(active) * step
        decision = allocate(active, history,
                            epsilon if bandit else math.inf,
                            max_iterations, rule=bandit_rule)
        for m in decision.finished:
            if best is None or (m.val_error or 1.0) < (best.val_error or 1.0):
                best = m
        active = list(decision.continued)
        if truncated:
            break

    best_finished = best is not None
    if best is None:
        rec = history.best()
        if rec is not None:
            best = models_by_id.get(rec.model_id)
    return PlanResult(best=best, history=history, scans_used=scans,
                      wall_seconds=time.perf_counter() - start,
                      best_finished=best_finished,
                      knobs={"planner": "tupaq", "strategy": getattr(strategy, "kind", "?"),
                             "partial_iters": partial_iters, "batch_size": batch_size,
                             "epsilon": epsilon, "max_iterations": max_iterations,
                             "bandit": bandit, "batching": batching,
                             "bandit_rule": bandit_rule, "kernel": kernel})
