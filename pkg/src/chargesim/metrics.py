"""Reported quantities: RLTL, refresh-relative locality, weighted speedup,
command-count energy, and the per-run report."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple, Optional

from .dram import ACT, PRE, PREA, READ, REF, WRITE, DramCommand
from .errors import InputError, MetricError

DEFAULT_WINDOWS_MS = (0.125, 0.5, 1.0, 8.0, 32.0)


class RowEvent(NamedTuple):
    cycle: int
    kind: str  # ACT or PRE
    channel: int
    rank: int
    bank: int
    row: int


def row_events(log: Iterable[DramCommand], scale: int = 1) -> list[RowEvent]:
    """ACT/PRE events of one channel's command log, with PREA expanded into a
    PRE per open bank. Cycles are multiplied by `scale`."""
    open_rows: dict = {}
    out = []
    for c in log:
        if c.kind == ACT:
            open_rows[(c.rank, c.bank)] = c.row
            out.append(RowEvent(c.cycle * scale, ACT, c.channel, c.rank, c.bank, c.row))
        elif c.kind == PRE:
            row = open_rows.pop((c.rank, c.bank))
            out.append(RowEvent(c.cycle * scale, PRE, c.channel, c.rank, c.bank, row))
        elif c.kind == PREA:
            for (r, b) in sorted(k for k in open_rows if k[0] == c.rank):
                out.append(RowEvent(c.cycle * scale, PRE, c.channel, r, b, open_rows.pop((r, b))))
    return out


def merge_events(per_channel: list[list[RowEvent]]) -> list[RowEvent]:
    merged = [e for evs in per_channel for e in evs]
    merged.sort(key=lambda e: (e.cycle, e.channel))
    return merged


@dataclass
class RltlHistogram:
    windows_ms: tuple
    window_cycles: tuple
    counts: list
    total: int = 0
    first_touch: int = 0

    def fractions(self) -> list[float]:
        if not self.total:
            return [0.0] * len(self.counts)
        return [c / self.total for c in self.counts]

    def as_dict(self) -> dict:
        return {"windows_ms": list(self.windows_ms), "window_cycles": list(self.window_cycles),
                "counts": list(self.counts), "total": self.total,
                "first_touch": self.first_touch, "fractions": self.fractions()}


def compute_rltl(events: Iterable[RowEvent], windows_ms=DEFAULT_WINDOWS_MS,
                 cycles_per_ms: int = 4_000_000, start: int = 0) -> RltlHistogram:
    """Count activations that follow a precharge of the same row within each
    window. Only activations at or after `start` are counted; earlier
    precharges still serve as predecessors."""
    wc = tuple(int(round(w * cycles_per_ms)) for w in windows_ms)
    counts = [0] * len(wc)
    last_pre: dict = {}
    total = first = 0
    prev = None
    for e in events:
        if prev is not None and e.cycle < prev:
            raise InputError(f"event log not in cycle order at cycle {e.cycle}")
        prev = e.cycle
        key = (e.channel, e.rank, e.bank, e.row)
        if e.kind == PRE:
            last_pre[key] = e.cycle
            continue
        if e.cycle < start:
            continue
        total += 1
        t = last_pre.get(key)
        if t is None:
            first += 1
            continue
        gap = e.cycle - t
        for i, w in enumerate(wc):
            if gap <= w:
                counts[i] += 1
    return RltlHistogram(tuple(windows_ms), wc, counts, total, first)


@dataclass
class RefreshHistory:
    """Per-rank refresh bookkeeping replayable against an activation log.

    `initial` maps (channel, rank) to the starting per-group timestamps;
    `refreshes` maps (channel, rank) to REF cycles in order. All cycles share
    one clock domain.
    """

    rows_per_ref: int
    initial: dict
    refreshes: dict = field(default_factory=dict)


def compute_refresh_locality(events: Iterable[RowEvent], history: Optional[RefreshHistory],
                             window: int, start: int = 0) -> float:
    """Fraction of activations within `window` cycles of their row's last refresh."""
    if history is None or not history.initial:
        raise InputError("refresh-relative locality needs refresh bookkeeping")
    stamps = {k: list(v) for k, v in history.initial.items()}
    ptr = {k: 0 for k in stamps}
    pending = {k: list(history.refreshes.get(k, ())) for k in stamps}
    idx = {k: 0 for k in stamps}
    hit = total = 0
    for e in events:
        if e.kind != ACT:
            continue
        key = (e.channel, e.rank)
        if key not in stamps:
            raise InputError(f"no refresh bookkeeping for channel {e.channel} rank {e.rank}")
        refs, s = pending[key], stamps[key]
        while idx[key] < len(refs) and refs[idx[key]] <= e.cycle:
            s[ptr[key]] = refs[idx[key]]
            ptr[key] = (ptr[key] + 1) % len(s)
            idx[key] += 1
        if e.cycle < start:
            continue
        total += 1
        if e.cycle - s[e.row // history.rows_per_ref] <= window:
            hit += 1
    return hit / total if total else 0.0


def weighted_speedup(shared: list[float], alone: list[float]) -> float:
    if len(shared) != len(alone):
        raise MetricError("shared and alone IPC lists differ in length")
    if any(a <= 0 for a in alone):
        raise MetricError("alone-run IPC must be positive")
    return sum(s / a for s, a in zip(shared, alone))


def rmpkc(activations: int, cycles: int) -> float:
    """Row misses (activations) per thousand CPU cycles."""
    return 1000.0 * activations / cycles if cycles else 0.0


@dataclass(frozen=True)
class EnergyModel:
    """Linear DRAM energy model for one 64-bit DDR3-1600 rank of eight x8
    4Gb devices at 1.5 V, derived from datasheet IDD currents."""

    act_pre_nj: float = 16.3
    read_nj: float = 5.7
    write_nj: float = 6.0
    ref_nj: float = 592.8
    standby_mw: float = 420.0
    active_mw: float = 540.0

    def problems(self) -> list[str]:
        return [f"energy.{k} must be non-negative" for k, v in asdict(self).items() if v < 0]


ENERGY_KEYS = ("act_pre", "read", "write", "refresh", "background", "advisor")


def compute_energy(logs: list[list[DramCommand]], start: int, end: int, model: EnergyModel,
                   ranks_per_channel: int, tck_ns: float, advisor_mw: float = 0.0) -> dict:
    """DRAM energy (nJ) over DRAM cycles [start, end).

    Background power is active power while any bank of a rank is open and
    standby power otherwise.
    """
    counts = {ACT: 0, READ: 0, WRITE: 0, REF: 0}
    active_cycles = 0
    for log in logs:
        open_banks = [set() for _ in range(ranks_per_channel)]
        since = [None] * ranks_per_channel  # cycle the rank became active
        for c in log:
            if c.cycle >= end:
                break
            if c.cycle >= start and c.kind in counts:
                counts[c.kind] += 1
            ob = open_banks[c.rank]
            if c.kind == ACT:
                if not ob:
                    since[c.rank] = c.cycle
                ob.add(c.bank)
            elif c.kind in (PRE, PREA):
                if c.kind == PRE:
                    ob.discard(c.bank)
                else:
                    ob.clear()
                if not ob and since[c.rank] is not None:
                    active_cycles += max(0, c.cycle - max(since[c.rank], start))
                    since[c.rank] = None
        for r in range(ranks_per_channel):
            if since[r] is not None:
                active_cycles += max(0, end - max(since[r], start))
    n_ranks = len(logs) * ranks_per_channel
    span = max(0, end - start)
    standby_cycles = n_ranks * span - active_cycles
    # mW * ns = pJ
    background = (active_cycles * model.active_mw + standby_cycles * model.standby_mw) * tck_ns / 1000
    out = {
        "act_pre": counts[ACT] * model.act_pre_nj,
        "read": counts[READ] * model.read_nj,
        "write": counts[WRITE] * model.write_nj,
        "refresh": counts[REF] * model.ref_nj,
        "background": background,
        "advisor": advisor_mw * span * tck_ns / 1000,
    }
    total = 0.0
    for k in ENERGY_KEYS:
        total += out[k]
    out["total"] = total
    return out


@dataclass
class SimReport:
    cycles: int
    instructions: list
    ipc: list
    weighted_speedup: Optional[float]
    alone_ipc: Optional[list]
    rmpkc: float
    activations: int
    advisor_hits: int
    hit_rate: float
    rltl: dict
    refresh_locality: dict
    command_counts: dict
    energy_nj: dict
    storage: dict
    invariants: dict
    config: dict
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
