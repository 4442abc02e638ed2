"""Simulation clock.

All timestamps in the toolkit are integer epoch milliseconds.  Protocol
components never read wall time directly; they take a clock so that TTL
and replay behavior is testable on a manual clock and reproducible in
simulations.
"""

from __future__ import annotations

import time


class ManualClock:
    """Clock that advances only through explicit `advance` calls."""

    def __init__(self, start_ms: int = 0):
        self._now = int(start_ms)

    def now(self) -> int:
        return self._now

    def advance(self, delta_ms: int) -> int:
        if delta_ms < 0:
            raise ValueError("clock cannot move backwards")
        self._now += int(delta_ms)
        return self._now


class SystemClock:
    """Wall-time clock for interactive use."""

    def now(self) -> int:
        return int(time.time() * 1000)
