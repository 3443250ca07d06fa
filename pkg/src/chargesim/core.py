"""Trace-driven core front end with an in-order retire window and MSHRs."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .traces import TraceRecord, instruction_count


@dataclass(frozen=True)
class CoreConfig:
    issue_width: int = 3
    window: int = 128
    mshrs: int = 8
    cpu_freq_mhz: float = 4000.0
    clock_ratio: int = 5  # CPU cycles per DRAM bus cycle
    warmup_cycles: int = 2_000_000

    def problems(self) -> list[str]:
        out = []
        for name in ("issue_width", "window", "mshrs", "clock_ratio"):
            if getattr(self, name) < 1:
                out.append(f"cores.{name} must be >= 1")
        if self.warmup_cycles < 0:
            out.append("cores.warmup_cycles must be >= 0")
        if self.cpu_freq_mhz <= 0:
            out.append("cores.cpu_freq_mhz must be positive")
        return out


class Load:
    """Window slot of an outstanding read."""

    __slots__ = ("done",)

    def __init__(self):
        self.done = False


class Core:
    """One core replaying a post-LLC memory trace.

    Each cycle the core first retires up to `issue_width` instructions from
    the window head (a read retires only once its data has returned), then
    dispatches up to `issue_width` new ones. A read needs a free window slot,
    a free MSHR and room in the controller's read queue. A write needs room
    in the write queue and is ready as soon as it is dispatched.

    Ready instructions are stored in the window as run-length integers.
    """

    def __init__(self, core_id: int, trace: list[TraceRecord], issue_width: int = 3,
                 window: int = 128, mshrs: int = 8, quota: Optional[int] = None,
                 replay: bool = True):
        self.id = core_id
        self.trace = trace
        self.width = issue_width
        self.window_cap = window
        self.mshrs = mshrs
        self.quota = quota if quota is not None else instruction_count(trace)
        self.replay = replay
        self.window: deque = deque()
        self.occupancy = 0
        self.outstanding = 0
        self.retired = 0  # since simulation start; the quota counts these
        self.retired_base = 0
        self.finish_retired = 0
        self.cursor = 0
        self.passes = 0
        self.exhausted = not trace
        self.bubbles_left = trace[0].bubble_count if trace else 0
        self.start_cycle = 0
        self.finish_cycle: Optional[int] = None
        self.wake = 0

    @property
    def finished(self) -> bool:
        return self.finish_cycle is not None

    @property
    def measured_instructions(self) -> int:
        end = self.finish_retired if self.finish_cycle is not None else self.retired
        return end - self.retired_base

    def reset_stats(self, now: int) -> None:
        """Start the measured phase. The quota still counts from cycle 0."""
        self.retired_base = self.retired
        self.start_cycle = now

    def ipc(self) -> float:
        if self.finish_cycle is None:
            return 0.0
        return self.measured_instructions / max(1, self.finish_cycle - self.start_cycle)

    def complete(self, load: Load) -> None:
        load.done = True
        self.outstanding -= 1

    def _advance(self) -> None:
        self.cursor += 1
        if self.cursor == len(self.trace):
            self.passes += 1
            if not self.replay:
                self.exhausted = True
                return
            self.cursor = 0
        self.bubbles_left = self.trace[self.cursor].bubble_count

    def tick(self, now: int, port) -> bool:
        """Simulate CPU cycle `now`. `port.send(core_id, record, now, load)`
        returns False when the controller queue is full.

        Returns True if the core can make progress next cycle; otherwise it
        only needs ticking again after a read completes or a queue slot frees.
        """
        width = self.width
        win = self.window
        budget = width
        while budget and win:
            head = win[0]
            if head.__class__ is int:
                if head <= budget:
                    win.popleft()
                    n = head
                else:
                    win[0] = head - budget
                    n = budget
                budget -= n
                self.occupancy -= n
                self.retired += n
            elif head.done:
                win.popleft()
                budget -= 1
                self.occupancy -= 1
                self.retired += 1
            else:
                break
        if self.finish_cycle is None and (self.retired >= self.quota
                                          or (self.exhausted and not win)):
            self.finish_cycle = now
            self.finish_retired = self.retired

        budget = width
        blocked = False
        cap = self.window_cap
        while budget and self.occupancy < cap and not self.exhausted:
            if self.bubbles_left:
                n = min(budget, self.bubbles_left, cap - self.occupancy)
                if win and win[-1].__class__ is int:
                    win[-1] += n
                else:
                    win.append(n)
                self.bubbles_left -= n
                self.occupancy += n
                budget -= n
                continue
            rec = self.trace[self.cursor]
            if rec.kind == "R":
                if self.outstanding >= self.mshrs:
                    blocked = True
                    break
                load = Load()
                if not port.send(self.id, rec, now, load):
                    blocked = True
                    break
                win.append(load)
                self.outstanding += 1
            else:
                if not port.send(self.id, rec, now, None):
                    blocked = True
                    break
                if win and win[-1].__class__ is int:
                    win[-1] += 1
                else:
                    win.append(1)
            self.occupancy += 1
            budget -= 1
            self._advance()

        if win:
            head = win[0]
            if head.__class__ is int or head.done:
                return True
        return not blocked and not self.exhausted and self.occupancy < cap
