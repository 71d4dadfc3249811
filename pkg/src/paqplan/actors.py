"""Actor realization of the Driver/Searcher/Executor protocol.

Three entities communicate only by asynchronous messages over per-actor
FIFO mailboxes, each processing one message at a time:

    driver  -> searcher  RunSearch(space, split)    begin the search process
    poller  -> searcher  TopModel()   -> best model so far (None before any)
                         AllBuilt()   -> bool, is the search finished?
                         ModelsBuilt() -> int, models built so far
                         Models()     -> list of all built models
    searcher -> executor BuildModel(config)         add to the work queue
                         DoWork()                   start consuming the queue
                         StopWork()                 pause; queue is preserved
    poller  -> executor  QueueSize()  -> int, pending configurations
    executor -> searcher ModelBuilt(model)          one configuration done
                         WorkDone()                 work queue is empty

A batch-capable executor pops up to ``batch_size`` configurations into one
training task; a sequential executor trains one at a time. Every message is
recorded in a trace (kind, sender, recipient, timestamp) for protocol
tests. A second RunSearch to a live searcher is rejected with an error
reply rather than restarting the search.
"""

from __future__ import annotations

import itertools
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .data import DataSplit
from .executor import Engine
from .search import History, HistoryRecord, make_strategy
from .space import Configuration, SearchSpace
from .train import ModelState, make_model


# Message kinds. Queries return their reply through ask(); the rest are
# one-way sends.

@dataclass(frozen=True)
class RunSearch:
    space: SearchSpace
    split: DataSplit


@dataclass(frozen=True)
class TopModel:
    pass


@dataclass(frozen=True)
class AllBuilt:
    pass


@dataclass(frozen=True)
class ModelsBuilt:
    pass


@dataclass(frozen=True)
class Models:
    pass


@dataclass(frozen=True)
class BuildModel:
    config: Configuration


@dataclass(frozen=True)
class DoWork:
    pass


@dataclass(frozen=True)
class StopWork:
    pass


@dataclass(frozen=True)
class QueueSize:
    pass


@dataclass(frozen=True)
class ModelBuilt:
    model: ModelState


@dataclass(frozen=True)
class WorkDone:
    pass


@dataclass(frozen=True)
class RunSearchRejected:
    reason: str


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    sender: str
    recipient: str
    timestamp: float


class MessageTrace:
    """Thread-safe record of every message exchanged."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._events: list[TraceEvent] = []
        self._start = time.monotonic()

    def record(self, kind: str, sender: str, recipient: str) -> None:
        with self._lock:
            self._events.append(TraceEvent(kind, sender, recipient,
                                           time.monotonic() - self._start))

    def events(self) -> list[TraceEvent]:
        with self._lock:
            return list(self._events)

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events() if e.kind == kind)

    def lines(self) -> list[str]:
        return [f"{e.timestamp:.6f} {e.sender} -> {e.recipient}: {e.kind}"
                for e in self.events()]


@dataclass
class _Envelope:
    msg: object
    sender: str
    reply_to: queue.Queue | None = None


class _Stop:
    pass


_STOP = _Stop()


class Actor:
    """A named thread draining a FIFO mailbox, one message at a time.

    Subclasses implement ``_handle``; those with background work (a work
    queue to consume) override ``_has_work``/``_work_step``, which run only
    while the mailbox is empty so control messages always win.
    """

    def __init__(self, name: str, trace: MessageTrace):
        self.name = name
        self.trace = trace
        self._mailbox: queue.Queue[_Envelope | _Stop] = queue.Queue()
        self._thread = threading.Thread(target=self._loop, daemon=True, name=name)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._mailbox.put(_STOP)

    def join(self, timeout: float = 5.0) -> None:
        self._thread.join(timeout)

    def send(self, msg, sender: str = "user") -> None:
        self.trace.record(type(msg).__name__, sender, self.name)
        self._mailbox.put(_Envelope(msg, sender))

    def ask(self, msg, sender: str = "user", timeout: float = 30.0):
        self.trace.record(type(msg).__name__, sender, self.name)
        reply: queue.Queue = queue.Queue()
        self._mailbox.put(_Envelope(msg, sender, reply))
        return reply.get(timeout=timeout)

    def _loop(self) -> None:
        while True:
            if self._has_work():
                try:
                    env = self._mailbox.get_nowait()
                except queue.Empty:
                    self._work_step()
                    continue
            else:
                try:
                    env = self._mailbox.get(timeout=0.05)
                except queue.Empty:
                    continue
            if isinstance(env, _Stop):
                break
            result = self._handle(env.msg, env.sender)
            if env.reply_to is not None:
                env.reply_to.put(result)

    def _handle(self, msg, sender: str):
        raise NotImplementedError

    def _has_work(self) -> bool:
        return False

    def _work_step(self) -> None:
        pass


class ExecutorActor(Actor):
    """Work-queue consumer; evaluates model configurations.

    ``build_fn`` receives a list of configurations (one task) and returns
    the trained models. Batch-capable executors pop up to ``batch_size``
    configurations per task; sequential executors pop one.
    """

    def __init__(self, name: str, trace: MessageTrace, reply_to: Actor,
                 build_fn, batch_capable: bool = True, batch_size: int = 10):
        super().__init__(name, trace)
        self._reply_to = reply_to
        self._build_fn = build_fn
        self._batch_capable = batch_capable
        self._batch_size = max(1, batch_size)
        self._queue: deque[Configuration] = deque()
        self._consuming = False

    def _handle(self, msg, sender: str):
        if isinstance(msg, BuildModel):
            self._queue.append(msg.config)
            return None
        if isinstance(msg, DoWork):
            if not self._queue:
                self._emit(WorkDone())
            else:
                self._consuming = True
            return None
        if isinstance(msg, StopWork):
            self._consuming = False
            return None
        if isinstance(msg, QueueSize):
            return len(self._queue)
        raise ValueError(f"{self.name}: unexpected message {msg!r}")

    def _has_work(self) -> bool:
        return self._consuming and bool(self._queue)

    def _work_step(self) -> None:
        width = self._batch_size if self._batch_capable else 1
        group = [self._queue.popleft() for _ in range(min(width, len(self._queue)))]
        for model in self._build_fn(group):
            self._emit(ModelBuilt(model))
        if not self._queue:
            self._emit(WorkDone())
            self._consuming = False

    def _emit(self, msg) -> None:
        self._reply_to.send(msg, sender=self.name)


class SearcherActor(Actor):
    """Chooses configurations, farms them to its executor, collects results."""

    def __init__(self, name: str, trace: MessageTrace, strategy,
                 budget_models: int, executor_factory):
        super().__init__(name, trace)
        self._strategy = strategy
        self._budget = budget_models
        self._executor_factory = executor_factory
        self._executor: ExecutorActor | None = None
        self._space: SearchSpace | None = None
        self._history = History()
        self._models: list[ModelState] = []
        self._built = 0
        self._submitted = 0
        self._started = False
        self._done = False

    def _handle(self, msg, sender: str):
        if isinstance(msg, RunSearch):
            if self._started:
                return RunSearchRejected("search already running on this searcher")
            self._started = True
            self._space = msg.space
            self._executor = self._executor_factory(self)
            self._executor.start()
            self._dispatch()
            return None
        if isinstance(msg, ModelBuilt):
            model = msg.model
            self._models.append(model)
            self._built += 1
            self._history.update(HistoryRecord(
                config=model.config, iterations_used=model.iterations_used,
                val_error=model.val_error, status="finished",
                model_id=model.model_id))
            self._dispatch()
            return None
        if isinstance(msg, WorkDone):
            self._dispatch()
            return None
        if isinstance(msg, TopModel):
            scored = [m for m in self._models if m.val_error is not None]
            if not scored:
                return None
            return min(scored, key=lambda m: m.val_error)
        if isinstance(msg, AllBuilt):
            return self._done
        if isinstance(msg, ModelsBuilt):
            return self._built
        if isinstance(msg, Models):
            return list(self._models)
        raise ValueError(f"{self.name}: unexpected message {msg!r}")

    def _dispatch(self) -> None:
        if self._done or self._executor is None or self._space is None:
            return
        free = self._budget - self._submitted
        if free > 0 and not self._strategy.exhausted:
            proposals = self._strategy.propose(free, self._space, self._history)
            for cfg in proposals:
                self._executor.send(BuildModel(cfg), sender=self.name)
                self._submitted += 1
            if proposals:
                self._executor.send(DoWork(), sender=self.name)
        if self._built == self._submitted and (
                self._submitted >= self._budget or self._strategy.exhausted):
            self._done = True

    def shutdown(self) -> None:
        if self._executor is not None:
            self._executor.stop()
        self.stop()


class Driver:
    """Entry point: owns a searcher, forwards polls, reports results."""

    def __init__(self, space: SearchSpace, split: DataSplit, searcher_kind: str = "random",
                 budget_models: int = 8, max_iterations: int = 100, seed: int = 0,
                 batch_capable: bool = True, batch_size: int = 10,
                 sched_delay: float = 0.0, kernel: str = "matrix",
                 default_family: str = "logistic", build_fn=None,
                 trace: MessageTrace | None = None):
        self.trace = trace or MessageTrace()
        self.engine = Engine(sched_delay)
        strategy = make_strategy(searcher_kind, space, seed, budget_models=budget_models)
        counter = itertools.count()

        def default_build(configs: list[Configuration]) -> list[ModelState]:
            models = [make_model(cfg, split.train.dim, seed, default_family,
                                 model_id=next(counter)) for cfg in configs]
            self.engine.train_models(models, split, max_iterations,
                                     batching=batch_capable, kernel=kernel)
            return models

        def factory(searcher: SearcherActor) -> ExecutorActor:
            return ExecutorActor("executor", self.trace, searcher,
                                 build_fn or default_build,
                                 batch_capable=batch_capable, batch_size=batch_size)

        self.searcher = SearcherActor("searcher", self.trace, strategy,
                                      budget_models, factory)
        self.searcher.start()
        self.searcher.send(RunSearch(space, split), sender="driver")

    def top_model(self) -> ModelState | None:
        return self.searcher.ask(TopModel(), sender="driver")

    def all_built(self) -> bool:
        return self.searcher.ask(AllBuilt(), sender="driver")

    def models_built(self) -> int:
        return self.searcher.ask(ModelsBuilt(), sender="driver")

    def models(self) -> list[ModelState]:
        return self.searcher.ask(Models(), sender="driver")

    def wait(self, timeout: float = 60.0) -> bool:
        """Poll until the search finishes; True when all models are built."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.all_built():
                return True
            time.sleep(0.01)
        return False

    def shutdown(self) -> None:
        self.searcher.shutdown()
        self.searcher.join()


def driver_run(space: SearchSpace, split: DataSplit, searcher_kind: str = "random",
               **options) -> Driver:
    """Start a search and return the polling handle."""
    return Driver(space, split, searcher_kind, **options)
