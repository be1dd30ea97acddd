"""Deterministic discrete-event core: integer-picosecond clock, priority
queue, delayed message channels, and per-node random streams.

Simulated time is an integer count of picoseconds. The protocols under study
mix nanosecond photonic gates with microsecond ion gates and millisecond
coherence times; an integer clock keeps event ordering exact across that
range instead of leaving it to floating-point comparisons.

Random streams are split from one master seed keyed by node identity, so
adding a node never perturbs the draws of existing nodes.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable

import numpy as np

__all__ = [
    "PS_PER_S",
    "SimulationError",
    "StarvationError",
    "Event",
    "Engine",
    "Channel",
    "Delivery",
    "rng_stream",
]

PS_PER_S = 10**12


def to_ps(seconds: float) -> int:
    return round(seconds * PS_PER_S)


class SimulationError(RuntimeError):
    """A protocol violated the engine's contracts (fatal logic error)."""


class StarvationError(SimulationError):
    """The event queue drained before the run condition was met."""


@dataclass(frozen=True)
class Event:
    fire_time_ps: int
    seq: int
    target: Hashable
    payload: Any

    @property
    def fire_time_s(self) -> float:
        return self.fire_time_ps / PS_PER_S


@dataclass(frozen=True)
class Delivery:
    """A message arriving over a channel; ``arrived`` is False for lost photons."""

    src: Hashable
    payload: Any
    arrived: bool = True


class Engine:
    """Single-threaded event loop over a (fire_time, seq) priority queue."""

    def __init__(self):
        self._queue: list[tuple[int, int, Event]] = []
        self._now_ps = 0
        self._seq = 0
        self._handlers: dict[Hashable, Callable[["Engine", Event], None]] = {}

    @property
    def now_ps(self) -> int:
        return self._now_ps

    @property
    def now_s(self) -> float:
        return self._now_ps / PS_PER_S

    def register(self, node: Hashable, handler: Callable[["Engine", Event], None]):
        self._handlers[node] = handler

    def schedule_at_ps(self, time_ps: int, target: Hashable, payload: Any) -> Event:
        if time_ps < self._now_ps:
            raise SimulationError(
                f"cannot schedule at {time_ps} ps: clock already at {self._now_ps} ps"
            )
        event = Event(fire_time_ps=time_ps, seq=self._seq, target=target, payload=payload)
        self._seq += 1
        heapq.heappush(self._queue, (time_ps, event.seq, event))
        return event

    def schedule_in(self, delay_s: float, target: Hashable, payload: Any) -> Event:
        if delay_s < 0:
            raise SimulationError(f"negative delay {delay_s}")
        return self.schedule_at_ps(self._now_ps + to_ps(delay_s), target, payload)

    def _dispatch(self, event: Event):
        handler = self._handlers.get(event.target)
        if handler is None:
            raise SimulationError(f"no handler registered for target {event.target!r}")
        handler(self, event)

    def run_until(
        self,
        time_s: float | None = None,
        predicate: Callable[[], bool] | None = None,
    ) -> float:
        """Process events in (time, seq) order until a stop condition.

        With ``time_s``, processes every event with fire time <= time_s and
        returns with the clock at time_s. With ``predicate``, runs until it
        turns true (checked after each event); an empty queue before that is
        a starvation error. Exactly one condition must be given.
        """
        if (time_s is None) == (predicate is None):
            raise ValueError("give exactly one of time_s or predicate")
        if predicate is not None:
            if predicate():
                return self.now_s
            while self._queue:
                fire_ps, _, event = heapq.heappop(self._queue)
                self._now_ps = fire_ps
                self._dispatch(event)
                if predicate():
                    return self.now_s
            raise StarvationError(
                f"event queue empty at {self.now_s:.9f} s with run condition unmet"
            )
        horizon_ps = to_ps(time_s)
        if horizon_ps < self._now_ps:
            raise SimulationError("cannot run backwards")
        while self._queue and self._queue[0][0] <= horizon_ps:
            fire_ps, _, event = heapq.heappop(self._queue)
            self._now_ps = fire_ps
            self._dispatch(event)
        self._now_ps = horizon_ps
        return self.now_s


@dataclass(frozen=True)
class Channel:
    """Point-to-point fiber: fixed propagation delay, optional photon loss.

    Quantum channels consult their loss probability per transmission; the
    delivery still fires so the receiver can register the missing photon
    (detectors know the expected arrival slot from the heralding clock).
    """

    src: Hashable
    dst: Hashable
    delay_s: float
    kind: str = "classical"  # "classical" | "quantum"
    loss_prob: float = 0.0

    def __post_init__(self):
        if self.delay_s < 0:
            raise ValueError("delay_s must be >= 0")
        if self.kind not in ("classical", "quantum"):
            raise ValueError(f"unknown channel kind '{self.kind}'")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must lie in [0, 1]")

    def transmit(
        self, engine: Engine, payload: Any, rng: np.random.Generator | None = None
    ) -> Event:
        arrived = True
        if self.kind == "quantum" and self.loss_prob > 0.0:
            if rng is None:
                raise ValueError("quantum channel with loss needs an rng")
            arrived = bool(rng.random() >= self.loss_prob)
        return engine.schedule_in(
            self.delay_s, self.dst, Delivery(src=self.src, payload=payload, arrived=arrived)
        )


def rng_stream(seed: int, *key: Hashable) -> np.random.Generator:
    """Generator for one node, reproducibly derived from (seed, key)."""
    material = [seed] + [
        part if isinstance(part, int) else int.from_bytes(str(part).encode(), "little")
        for part in key
    ]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(material)))
