"""Parallel execution of independent Monte-Carlo trials.

Trial ``i`` of a stream draws from ``PCG64(derive_seed(master, stream, i))``
so results do not depend on the number of workers or on scheduling order.
A failing trial is recorded and does not abort the run.
"""

from __future__ import annotations

import asyncio
import logging
import threading
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Generic, TypeVar

import numpy as np

from ..errors import InvalidParameter
from .seeding import derive_seed, make_rng

LOG = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(slots=True)
class TrialContext:
    """What a trial function receives."""

    stream: str
    index: int
    seed: int
    rng: np.random.Generator


@dataclass(slots=True)
class TrialOutcome(Generic[T]):
    index: int
    seed: int
    value: T | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(slots=True)
class TrialTimeline:
    """Lifecycle of one trial."""

    stream: str
    index: int
    seed: int | None = None
    started_at: float | None = None
    completed_at: float | None = None
    status: str = "pending"
    error: str | None = None

    @property
    def elapsed(self) -> float | None:
        if self.started_at is None or self.completed_at is None:
            return None
        return self.completed_at - self.started_at


class TrialTracker:
    """Track trial timelines keyed by (stream, index); safe to call from worker threads."""

    def __init__(self) -> None:
        self._timelines: dict[tuple[str, int], TrialTimeline] = {}
        self._lock = threading.Lock()

    # ------------------------------------------------------------------
    # Trial lifecycle helpers
    # ------------------------------------------------------------------
    def _ensure_timeline(self, stream: str, index: int) -> TrialTimeline:
        # callers hold self._lock
        timeline = self._timelines.get((stream, index))
        if timeline is None:
            timeline = TrialTimeline(stream=stream, index=index)
            self._timelines[(stream, index)] = timeline
        return timeline

    def track_start(self, stream: str, index: int, *, seed: int, timestamp: float) -> None:
        with self._lock:
            timeline = self._ensure_timeline(stream, index)
            timeline.seed = seed
            timeline.started_at = timestamp
            timeline.status = "pending"

    def track_completion(self, stream: str, index: int, *, timestamp: float) -> None:
        with self._lock:
            timeline = self._ensure_timeline(stream, index)
            timeline.completed_at = timestamp
            timeline.status = "complete"

    def track_failure(self, stream: str, index: int, *, error: str, timestamp: float) -> None:
        with self._lock:
            timeline = self._ensure_timeline(stream, index)
            timeline.completed_at = timestamp
            timeline.status = "failed"
            timeline.error = error

    def get_timeline(self, stream: str, index: int) -> TrialTimeline | None:
        with self._lock:
            return self._timelines.get((stream, index))

    def failures(self) -> list[TrialTimeline]:
        with self._lock:
            failed = [t for t in self._timelines.values() if t.status == "failed"]
        return sorted(failed, key=lambda t: (t.stream, t.index))

    def seeds(self) -> list[int]:
        with self._lock:
            items = sorted(self._timelines.items())
        return [t.seed for _, t in items if t.seed is not None]


class TrialRunner:
    """Run ``count`` trials of a stream on a pool of ``workers`` threads."""

    def __init__(self, experiment: str, master_seed: int, workers: int = 1) -> None:
        if workers < 1:
            raise InvalidParameter(f"workers must be >= 1, got {workers}")
        self.experiment = experiment
        self.master_seed = master_seed
        self.workers = workers
        self.tracker = TrialTracker()

    def stream_name(self, label: str | None) -> str:
        return self.experiment if not label else f"{self.experiment}/{label}"

    def context(self, index: int, label: str | None = None) -> TrialContext:
        stream = self.stream_name(label)
        seed = derive_seed(self.master_seed, stream, index)
        return TrialContext(stream=stream, index=index, seed=seed, rng=make_rng(seed))

    def _execute(
        self, trial: Callable[[TrialContext], T], context: TrialContext
    ) -> TrialOutcome[T]:
        self.tracker.track_start(
            context.stream, context.index, seed=context.seed, timestamp=time.monotonic()
        )
        try:
            value = trial(context)
        except Exception as exc:  # noqa: BLE001
            message = f"{type(exc).__name__}: {exc}"
            LOG.warning("trial %s#%d failed: %s", context.stream, context.index, message)
            self.tracker.track_failure(
                context.stream, context.index, error=message, timestamp=time.monotonic()
            )
            return TrialOutcome(index=context.index, seed=context.seed, error=message)
        self.tracker.track_completion(context.stream, context.index, timestamp=time.monotonic())
        return TrialOutcome(index=context.index, seed=context.seed, value=value)

    async def run_async(
        self, trial: Callable[[TrialContext], T], count: int, *, label: str | None = None
    ) -> list[TrialOutcome[T]]:
        if count < 0:
            raise InvalidParameter(f"trial count must be >= 0, got {count}")
        loop = asyncio.get_running_loop()
        contexts = [self.context(index, label) for index in range(count)]
        LOG.debug(
            "running %d trials of %s on %d workers", count, self.stream_name(label), self.workers
        )
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [loop.run_in_executor(pool, self._execute, trial, ctx) for ctx in contexts]
            outcomes = await asyncio.gather(*futures)
        return sorted(outcomes, key=lambda outcome: outcome.index)

    def run(
        self, trial: Callable[[TrialContext], T], count: int, *, label: str | None = None
    ) -> list[TrialOutcome[T]]:
        return asyncio.run(self.run_async(trial, count, label=label))


def successful(outcomes: list[TrialOutcome[T]]) -> list[T]:
    """Values of the trials that completed, in index order."""

    return [outcome.value for outcome in outcomes if outcome.ok]  # type: ignore[misc]
