"""DRAM geometry, timing constraints, per-bank state machine and refresh engine.

All cycle values in this module are DRAM bus cycles (800 MHz for DDR3-1600).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

from .errors import ConfigError, TimingProtocolError

# Sentinel for "never happened"; far enough in the past that any
# difference against it satisfies every constraint.
NEVER = -(1 << 60)

ACT = "ACT"
PRE = "PRE"
PREA = "PREA"
READ = "READ"
WRITE = "WRITE"
REF = "REF"
COMMAND_KINDS = (ACT, PRE, PREA, READ, WRITE, REF)

PRECHARGED = "Precharged"
ACTIVATING = "Activating"
ACTIVATED = "Activated"
PRECHARGING = "Precharging"


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class DramGeometry:
    channels: int = 1
    ranks_per_channel: int = 1
    banks_per_rank: int = 8
    rows_per_bank: int = 65536
    row_buffer_bytes: int = 8192
    line_bytes: int = 64

    @property
    def columns_per_row(self) -> int:
        """Cache-line sized columns in one row."""
        return self.row_buffer_bytes // self.line_bytes

    @property
    def banks_per_channel(self) -> int:
        return self.ranks_per_channel * self.banks_per_rank

    @property
    def capacity_bytes(self) -> int:
        return (self.channels * self.ranks_per_channel * self.banks_per_rank
                * self.rows_per_bank * self.row_buffer_bytes)

    def problems(self) -> list[str]:
        out = []
        for name in ("channels", "ranks_per_channel", "banks_per_rank",
                     "rows_per_bank", "row_buffer_bytes", "line_bytes"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                out.append(f"geometry.{name} must be an integer >= 1 (got {v!r})")
            elif not _is_pow2(v):
                out.append(f"geometry.{name} must be a power of two (got {v})")
        if not out and self.row_buffer_bytes < self.line_bytes:
            out.append("geometry.row_buffer_bytes must be >= line_bytes")
        return out

    def validate(self) -> "DramGeometry":
        errs = self.problems()
        if errs:
            raise ConfigError(errs)
        return self


@dataclass(frozen=True)
class TimingParams:
    """A complete timing-constraint set in DRAM cycles.

    Reduced variants share everything with the standard set except
    tRCD and tRAS.
    """

    tRCD: int = 11
    tRAS: int = 28
    tRP: int = 11
    tCL: int = 11
    tCWL: int = 8
    tBL: int = 4
    tRFC: int = 208
    tREFI: int = 6240
    bus_freq_mhz: float = 800.0
    name: str = "standard"

    @property
    def tck_ns(self) -> float:
        return 1000.0 / self.bus_freq_mhz

    def ns_to_cycles(self, ns: float) -> int:
        """Convert nanoseconds to cycles, rounding up."""
        # round() guards against 13.75/1.25 = 11.000000000000002
        return math.ceil(round(ns / self.tck_ns, 9))

    def reduced(self, tRCD: int, tRAS: int, name: str) -> "TimingParams":
        return replace(self, tRCD=tRCD, tRAS=tRAS, name=name)

    def problems(self) -> list[str]:
        out = []
        for name in ("tRCD", "tRAS", "tRP", "tCL", "tCWL", "tBL", "tRFC", "tREFI"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                out.append(f"timing.{name} must be an integer >= 1 (got {v!r})")
        if not out and self.tRAS < self.tRCD:
            out.append(f"timing variant {self.name!r}: tRAS ({self.tRAS}) < tRCD ({self.tRCD})")
        if self.bus_freq_mhz <= 0:
            out.append("timing.bus_freq_mhz must be positive")
        return out


class DramCommand(NamedTuple):
    kind: str
    channel: int
    rank: int
    bank: int
    row: Optional[int]
    column: Optional[int]
    cycle: int
    # tRCD/tRAS latched by an ACT; None for every other command
    trcd: Optional[int] = None
    tras: Optional[int] = None


@dataclass(frozen=True)
class BankState:
    open_row: Optional[int] = None
    last_act: int = NEVER
    last_pre: int = NEVER
    last_rdwr: int = NEVER
    ref_until: int = NEVER
    active_timing: Optional[TimingParams] = None

    def phase(self, now: int, timing: TimingParams) -> str:
        if self.open_row is not None:
            if now - self.last_act < self.active_timing.tRCD:
                return ACTIVATING
            return ACTIVATED
        if now - self.last_pre < timing.tRP or now < self.ref_until:
            return PRECHARGING
        return PRECHARGED


def earliest_issue(bank: BankState, kind: str, timing: TimingParams) -> Optional[int]:
    """Earliest cycle at which `kind` becomes legal for `bank`, or None if the
    bank is in the wrong phase for it (bank-local constraints only)."""
    if kind in (READ, WRITE):
        if bank.open_row is None:
            return None
        return bank.last_act + bank.active_timing.tRCD
    if kind in (PRE, PREA):
        if bank.open_row is None:
            return None
        return bank.last_act + bank.active_timing.tRAS
    if kind in (ACT, REF):
        if bank.open_row is not None:
            return None
        return max(bank.last_pre + timing.tRP, bank.ref_until)
    raise ValueError(f"unknown command kind {kind!r}")


def _violation(bank: BankState, cmd: DramCommand, now: int,
               timing: TimingParams) -> Optional[tuple[str, int]]:
    kind = cmd.kind
    if kind in (READ, WRITE):
        if bank.open_row is None:
            return ("row-closed", 0)
        if cmd.row is not None and cmd.row != bank.open_row:
            return ("row-mismatch", 0)
        need = bank.last_act + bank.active_timing.tRCD
        return ("tRCD", need - now) if now < need else None
    if kind in (PRE, PREA):
        if bank.open_row is None:
            return ("row-closed", 0)
        need = bank.last_act + bank.active_timing.tRAS
        return ("tRAS", need - now) if now < need else None
    if kind in (ACT, REF):
        if bank.open_row is not None:
            return ("row-open", 0)
        if now < bank.last_pre + timing.tRP:
            return ("tRP", bank.last_pre + timing.tRP - now)
        if now < bank.ref_until:
            return ("tRFC", bank.ref_until - now)
        return None
    raise ValueError(f"unknown command kind {kind!r}")


def can_issue(bank: BankState, cmd: DramCommand, now: int, timing: TimingParams) -> bool:
    """True iff `cmd` may be issued to `bank` at cycle `now`.

    `timing` is the variant an ACT would latch; READ/WRITE/PRE are checked
    against the variant latched by the bank's current activation.
    """
    return _violation(bank, cmd, now, timing) is None


def apply(bank: BankState, cmd: DramCommand, now: int, timing: TimingParams) -> BankState:
    bad = _violation(bank, cmd, now, timing)
    if bad is not None:
        raise TimingProtocolError(bad[0], bad[1], cmd)
    kind = cmd.kind
    if kind == ACT:
        return replace(bank, open_row=cmd.row, last_act=now, active_timing=timing)
    if kind in (PRE, PREA):
        return replace(bank, open_row=None, last_pre=now, active_timing=None)
    if kind in (READ, WRITE):
        return replace(bank, last_rdwr=now)
    return replace(bank, ref_until=now + timing.tRFC)


def rank_can_refresh(banks: list[BankState], now: int, timing: TimingParams) -> bool:
    return all(earliest_issue(b, REF, timing) is not None
               and earliest_issue(b, REF, timing) <= now for b in banks)


@dataclass
class RefreshEngine:
    """Rank-level auto-refresh with per-row-group refresh timestamps.

    Each REF refreshes the next `rows_per_ref` consecutive rows in every bank.
    The timestamps start in steady state, as though refresh had been running
    forever: group g was last refreshed at (g + 1 - groups) * tREFI, so the
    first REF (due at tREFI) hits group 0 exactly one retention window later.
    """

    rows_per_bank: int
    timing: TimingParams
    groups: int = 8192
    max_postpone: int = 8
    channel: int = 0
    rank: int = 0
    pointer: int = 0
    next_due: int = 0
    issued: int = 0
    max_lateness: int = 0
    late_refreshes: int = 0
    stamps: list = field(default_factory=list)

    def __post_init__(self):
        self.groups = min(self.groups, self.rows_per_bank)
        self.rows_per_ref = self.rows_per_bank // self.groups
        t = self.timing.tREFI
        if not self.stamps:
            self.stamps = [(g + 1 - self.groups) * t for g in range(self.groups)]
        if self.next_due == 0:
            self.next_due = t

    def initial_stamps(self) -> list[int]:
        t = self.timing.tREFI
        return [(g + 1 - self.groups) * t for g in range(self.groups)]

    def last_refresh(self, row: int) -> int:
        return self.stamps[row // self.rows_per_ref]

    def due(self, now: int) -> bool:
        return now >= self.next_due

    def refresh_tick(self, banks: list[BankState], now: int) -> Optional[DramCommand]:
        """Issue a REF if one is due and every bank is precharged.

        On issue, `banks` is updated in place (tRFC blocking) and the next
        row group's timestamp is recorded.
        """
        if now < self.next_due or not rank_can_refresh(banks, now, self.timing):
            return None
        cmd = DramCommand(REF, self.channel, self.rank, -1, None, None, now)
        for i, b in enumerate(banks):
            banks[i] = apply(b, cmd, now, self.timing)
        lateness = now - self.next_due
        self.max_lateness = max(self.max_lateness, lateness)
        if lateness > self.max_postpone * self.timing.tREFI:
            self.late_refreshes += 1
        self.stamps[self.pointer] = now
        self.pointer = (self.pointer + 1) % self.groups
        self.next_due += self.timing.tREFI
        self.issued += 1
        return cmd
