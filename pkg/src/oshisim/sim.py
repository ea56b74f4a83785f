"""Deterministic discrete-event loop shared by every component.

Events fire in (time, insertion order) so identical inputs replay to
identical logs.  All randomness comes from seeded generators owned by the
callers; the loop itself is RNG-free.
"""

from __future__ import annotations

import heapq
from typing import Callable


class Simulation:
    def __init__(self) -> None:
        self.now = 0.0
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0
        self.log: list[tuple[float, str, str]] = []

    def at(self, t: float, fn: Callable[[], None]) -> None:
        if t < self.now:
            raise ValueError(f"cannot schedule at {t} < now {self.now}")
        heapq.heappush(self._heap, (t, self._seq, fn))
        self._seq += 1

    def schedule(self, delay: float, fn: Callable[[], None]) -> None:
        self.at(self.now + delay, fn)

    def run_until(self, t: float) -> None:
        """Fire every event scheduled strictly before or at t."""
        while self._heap and self._heap[0][0] <= t:
            when, _, fn = heapq.heappop(self._heap)
            self.now = when
            fn()
        self.now = max(self.now, t)

    def record(self, kind: str, detail: str) -> None:
        self.log.append((self.now, kind, detail))
