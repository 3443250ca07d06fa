"""Activation-latency advisors.

At every ACT the controller asks its advisor which timing variant the
activation may use. Variant 0 is always the standard timing; variant i >= 1
is row i of the reduction table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .dram import DramGeometry, TimingParams
from .errors import ConfigError

ADVISOR_NAMES = ("none", "chargecache", "nuat", "chargecache+nuat", "lldram")


class Verdict(NamedTuple):
    variant: int
    hit: bool


MISS = Verdict(0, False)


@dataclass(frozen=True)
class ReductionTable:
    """Caching duration (ms) -> (tRCD ns, tRAS ns), plus the baseline row.

    Defaults are the circuit-simulation results for DDR3-1600.
    """

    baseline: tuple = (13.75, 35.0)
    rows: tuple = ((1.0, 8.0, 22.0), (4.0, 9.0, 24.0), (16.0, 11.0, 28.0))

    def problems(self, standard: Optional[TimingParams] = None) -> list[str]:
        out = []
        durs = [r[0] for r in self.rows]
        if not self.rows:
            out.append("reduction table is empty")
        if any(b <= a for a, b in zip(durs, durs[1:])):
            out.append("reduction table durations must be strictly increasing")
        for a, b in zip(self.rows, self.rows[1:]):
            if b[1] < a[1] or b[2] < a[2]:
                out.append("reduction table tRCD/tRAS must be non-decreasing with duration")
                break
        if standard is not None:
            for v in self.variants(standard):
                if v.tRAS < v.tRCD:
                    out.append(f"reduction variant {v.name}: tRAS < tRCD after cycle conversion")
        return out

    def variants(self, standard: TimingParams) -> list[TimingParams]:
        out = [standard]
        for dur, trcd, tras in self.rows:
            out.append(standard.reduced(
                min(standard.tRCD, standard.ns_to_cycles(trcd)),
                min(standard.tRAS, standard.ns_to_cycles(tras)),
                f"{dur:g}ms"))
        return out

    def variant_for_duration(self, duration_ms: float) -> int:
        """Index (1-based) of the row with the smallest duration >= duration_ms."""
        for i, row in enumerate(self.rows):
            if row[0] >= duration_ms - 1e-12:
                return i + 1
        raise ConfigError(f"no reduction-table row covers a {duration_ms} ms duration")


class Hcrac:
    """Tag-only set-associative table of recently precharged rows.

    Entries expire through a pair of counters: the interval counter counts
    cycles up to duration/k, and each time it wraps the entry counter's slot
    is invalidated. Every slot is therefore invalidated once per `duration`
    cycles.

    Operations at cycle t observe all ticks of cycles < t. Ticks are applied
    lazily, so callers never need to tick every cycle.
    """

    def __init__(self, entries: int = 128, ways: int = 2,
                 duration: int = 4_000_000, invalidate_on_hit: bool = True):
        if entries < 1 or ways < 1 or entries % ways:
            raise ConfigError(f"HCRAC entries ({entries}) must be a positive multiple "
                              f"of associativity ({ways})")
        if duration < 1:
            raise ConfigError("HCRAC caching duration must be >= 1 cycle")
        self.k = entries
        self.w = ways
        self.sets = entries // ways
        self.interval = -(-duration // entries)
        self.duration = self.interval * entries
        self.invalidate_on_hit = invalidate_on_hit
        self.tags: list = [None] * entries
        self.inserted = [0] * entries
        self.lru = [0] * entries
        self._stamp = 0
        self.iic = 0
        self.ec = 0
        self.ticked_through = -1
        self.max_residency = 0
        self.invalidations = 0
        self.evictions = 0
        self.inserts = 0
        self.lookups = 0
        self.hits = 0

    def set_index(self, rank: int, bank: int, row: int) -> int:
        return (row ^ bank ^ (rank << 3)) % self.sets

    def _expire(self, slot: int, cycle: int) -> None:
        if self.tags[slot] is not None:
            res = cycle - self.inserted[slot]
            if res > self.max_residency:
                self.max_residency = res
            self.tags[slot] = None
            self.invalidations += 1

    def tick(self, now: int) -> None:
        """Run the counter ticks of every cycle up to and including `now`."""
        first = self.ticked_through + 1
        if now < first:
            return
        interval = self.interval
        total = self.iic + (now - first + 1)
        wraps = total // interval
        if wraps:
            first_wrap = first + interval - self.iic - 1
            for i in range(min(wraps, self.k)):
                self._expire((self.ec + i) % self.k, first_wrap + i * interval)
            self.ec = (self.ec + wraps) % self.k
        self.iic = total % interval
        self.ticked_through = now

    def _catch_up(self, now: int) -> None:
        if now <= self.ticked_through:
            raise ValueError(f"HCRAC access at cycle {now} after ticks through "
                             f"{self.ticked_through}")
        self.tick(now - 1)

    def _find(self, key, base: int) -> int:
        tags = self.tags
        for slot in range(base, base + self.w):
            if tags[slot] == key:
                return slot
        return -1

    def insert(self, rank: int, bank: int, row: int, now: int) -> None:
        self._catch_up(now)
        key = (rank, bank, row)
        base = self.set_index(rank, bank, row) * self.w
        self._stamp += 1
        self.inserts += 1
        slot = self._find(key, base)
        if slot < 0:
            victim = -1
            for s in range(base, base + self.w):
                if self.tags[s] is None:
                    victim = s
                    break
            if victim < 0:
                victim = min(range(base, base + self.w), key=self.lru.__getitem__)
                res = now - self.inserted[victim]
                if res > self.max_residency:
                    self.max_residency = res
                self.evictions += 1
            slot = victim
            self.tags[slot] = key
        self.inserted[slot] = now
        self.lru[slot] = self._stamp

    def lookup(self, rank: int, bank: int, row: int, now: int) -> bool:
        self._catch_up(now)
        self.lookups += 1
        slot = self._find((rank, bank, row), self.set_index(rank, bank, row) * self.w)
        if slot < 0:
            return False
        self.hits += 1
        res = now - self.inserted[slot]
        if res > self.max_residency:
            self.max_residency = res
        if self.invalidate_on_hit:
            self.tags[slot] = None
        else:
            self._stamp += 1
            self.lru[slot] = self._stamp
        return True

    def occupancy(self) -> int:
        return sum(t is not None for t in self.tags)

    def check_residency(self, now: int) -> int:
        """Max residency including entries still valid at `now`."""
        self.tick(now)
        worst = self.max_residency
        for slot, tag in enumerate(self.tags):
            if tag is not None:
                worst = max(worst, now - self.inserted[slot])
        return worst


class NullAdvisor:
    name = "none"
    uses_hcrac = False

    def on_activate(self, core, rank, bank, row, now):
        return MISS

    def on_precharge(self, core, rank, bank, row, now):
        pass

    def tick(self, now):
        pass


class LowLatencyAdvisor(NullAdvisor):
    """Idealized DRAM where every activation uses the reduced timing."""

    name = "lldram"

    def __init__(self, variant: int):
        self.verdict = Verdict(variant, True)

    def on_activate(self, core, rank, bank, row, now):
        return self.verdict


class ChargeCacheAdvisor(NullAdvisor):
    """One HCRAC per core (or one shared), for a single channel."""

    name = "chargecache"
    uses_hcrac = True

    def __init__(self, cores: int, entries: int, ways: int, duration: int,
                 variant: int, shared: bool = False, invalidate_on_hit: bool = True):
        n = 1 if shared else cores
        self.tables = [Hcrac(entries, ways, duration, invalidate_on_hit) for _ in range(n)]
        self.shared = shared
        self.hit_verdict = Verdict(variant, True)

    def _table(self, core: int) -> Hcrac:
        return self.tables[0 if self.shared else core]

    def on_activate(self, core, rank, bank, row, now):
        if self._table(core).lookup(rank, bank, row, now):
            return self.hit_verdict
        return MISS

    def on_precharge(self, core, rank, bank, row, now):
        self._table(core).insert(rank, bank, row, now)

    def tick(self, now):
        for t in self.tables:
            t.tick(now)

    def max_residency(self, now: int) -> int:
        return max(t.check_residency(now) for t in self.tables)

    def occupancy(self) -> int:
        return sum(t.occupancy() for t in self.tables)


class NuatAdvisor(NullAdvisor):
    """Reduced timing for rows refreshed recently.

    `bins` is a list of (max age in cycles, variant), ordered by age; rows
    older than the last bin use standard timing.
    """

    name = "nuat"

    def __init__(self, last_refresh, bins):
        self.last_refresh = last_refresh
        self.bins = [(age, Verdict(v, True)) for age, v in bins]

    def on_activate(self, core, rank, bank, row, now):
        age = now - self.last_refresh(rank, row)
        for limit, verdict in self.bins:
            if age < limit:
                return verdict
        return MISS


class CombinedAdvisor(NullAdvisor):
    """ChargeCache and NUAT together; the faster hitting variant wins."""

    name = "chargecache+nuat"
    uses_hcrac = True

    def __init__(self, cc: ChargeCacheAdvisor, nuat: NuatAdvisor):
        self.cc = cc
        self.nuat = nuat

    @property
    def tables(self):
        return self.cc.tables

    def on_activate(self, core, rank, bank, row, now):
        a = self.cc.on_activate(core, rank, bank, row, now)
        b = self.nuat.on_activate(core, rank, bank, row, now)
        if a.hit and b.hit:
            return a if a.variant <= b.variant else b
        return a if a.hit else b

    def on_precharge(self, core, rank, bank, row, now):
        self.cc.on_precharge(core, rank, bank, row, now)

    def tick(self, now):
        self.cc.tick(now)

    def max_residency(self, now):
        return self.cc.max_residency(now)

    def occupancy(self):
        return self.cc.occupancy()


def _log2_exact(n: int, what: str) -> int:
    if n < 1 or n & (n - 1):
        raise ConfigError(f"{what} must be a power of two (got {n})")
    return n.bit_length() - 1


def entry_size_bits(ranks: int, banks: int, rows: int) -> int:
    """Row-address tag width plus one valid bit."""
    return (_log2_exact(ranks, "ranks") + _log2_exact(banks, "banks")
            + _log2_exact(rows, "rows") + 1)


def storage_cost(cores: int, channels: int, entries: int,
                 geometry: DramGeometry, associativity: int) -> int:
    """Total HCRAC storage in bits for per-core, per-channel tables."""
    for name, v in (("cores", cores), ("channels", channels), ("entries", entries),
                    ("associativity", associativity)):
        if v < 1:
            raise ConfigError(f"{name} must be >= 1")
    entry = entry_size_bits(geometry.ranks_per_channel, geometry.banks_per_rank,
                            geometry.rows_per_bank)
    lru = _log2_exact(associativity, "associativity")
    return cores * channels * entries * (entry + lru)


@dataclass(frozen=True)
class AdvisorConfig:
    name: str = "chargecache"
    entries: int = 128
    ways: int = 2
    duration_ms: float = 1.0
    shared: bool = False
    invalidate_on_hit: bool = True
    # NUAT bins: (upper age in ms, table duration whose timings apply)
    nuat_bins: tuple = ((6.0, 16.0), (16.0, 16.0))
    power_mw: float = 0.149

    def problems(self, table: ReductionTable) -> list[str]:
        out = []
        if self.name not in ADVISOR_NAMES:
            out.append(f"advisor.name must be one of {', '.join(ADVISOR_NAMES)} (got {self.name!r})")
        if self.entries < 1 or self.ways < 1 or self.entries % self.ways:
            out.append(f"advisor.entries ({self.entries}) must be a positive multiple of "
                       f"advisor.ways ({self.ways})")
        if self.duration_ms <= 0:
            out.append("advisor.duration_ms must be positive")
        elif not any(r[0] >= self.duration_ms - 1e-12 for r in table.rows):
            out.append(f"advisor.duration_ms={self.duration_ms} exceeds every reduction-table row")
        ages = [b[0] for b in self.nuat_bins]
        if any(b <= a for a, b in zip(ages, ages[1:])):
            out.append("advisor.nuat_bins ages must be strictly increasing")
        for _, dur in self.nuat_bins:
            if not any(abs(r[0] - dur) < 1e-12 for r in table.rows):
                out.append(f"advisor.nuat_bins refers to duration {dur} ms not in reduction table")
        if self.power_mw < 0:
            out.append("advisor.power_mw must be non-negative")
        return out


def build_advisor(cfg: AdvisorConfig, table: ReductionTable, cores: int,
                  cpu_mhz: float, last_refresh=None):
    """Instantiate the advisor for one channel. Durations are in CPU cycles."""
    cycles_per_ms = int(round(cpu_mhz * 1000))
    cc_variant = table.variant_for_duration(cfg.duration_ms)

    def make_cc():
        return ChargeCacheAdvisor(cores, cfg.entries, cfg.ways,
                                  int(math.ceil(cfg.duration_ms * cycles_per_ms)),
                                  cc_variant, cfg.shared, cfg.invalidate_on_hit)

    def make_nuat():
        bins = [(int(round(age * cycles_per_ms)), table.variant_for_duration(dur))
                for age, dur in cfg.nuat_bins]
        return NuatAdvisor(last_refresh, bins)

    if cfg.name == "none":
        return NullAdvisor()
    if cfg.name == "lldram":
        return LowLatencyAdvisor(cc_variant)
    if cfg.name == "chargecache":
        return make_cc()
    if cfg.name == "nuat":
        return make_nuat()
    if cfg.name == "chargecache+nuat":
        return CombinedAdvisor(make_cc(), make_nuat())
    raise ConfigError(f"unknown advisor {cfg.name!r}")
