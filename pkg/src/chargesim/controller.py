"""Per-channel memory controller: address mapping, request queues, FR-FCFS
scheduling under open- or closed-row policy, and command generation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .dram import (ACT, NEVER, PRE, PREA, READ, REF, WRITE, BankState, DramCommand,
                   DramGeometry, RefreshEngine, TimingParams, apply)
from .errors import AddressError, ConfigError

INF = float("inf")
FIELDS = ("row", "rank", "bank", "channel", "column")
DEFAULT_SCHEME = "row:rank:bank:channel:column"


class AddressMapper:
    """Bit-sliced physical address decomposition.

    `scheme` lists the fields from most to least significant; the cache-line
    offset always sits below them.
    """

    def __init__(self, geometry: DramGeometry, scheme: str = DEFAULT_SCHEME):
        names = scheme.split(":")
        if sorted(names) != sorted(FIELDS):
            raise ConfigError(f"mapping scheme {scheme!r} must be a permutation of "
                              f"{':'.join(FIELDS)}")
        geometry.validate()
        self.geometry = geometry
        self.scheme = scheme
        sizes = {"row": geometry.rows_per_bank, "rank": geometry.ranks_per_channel,
                 "bank": geometry.banks_per_rank, "channel": geometry.channels,
                 "column": geometry.columns_per_row}
        shift = geometry.line_bytes.bit_length() - 1
        self.offset_bits = shift
        self.slices = {}
        for name in reversed(names):
            bits = sizes[name].bit_length() - 1
            self.slices[name] = (shift, (1 << bits) - 1)
            shift += bits
        self.capacity = 1 << shift

    def map(self, address: int) -> tuple[int, int, int, int, int]:
        """Return (channel, rank, bank, row, column)."""
        if address < 0 or address >= self.capacity:
            raise AddressError(f"address {address:#x} outside capacity {self.capacity:#x}")
        s = self.slices
        return tuple((address >> s[f][0]) & s[f][1]
                     for f in ("channel", "rank", "bank", "row", "column"))

    def compose(self, channel: int, rank: int, bank: int, row: int, column: int,
                offset: int = 0) -> int:
        vals = {"channel": channel, "rank": rank, "bank": bank, "row": row, "column": column}
        addr = offset
        for name, (shift, mask) in self.slices.items():
            v = vals[name]
            if v < 0 or v > mask:
                raise AddressError(f"{name}={v} out of range")
            addr |= v << shift
        return addr


def map_address(physical_address: int, geometry: DramGeometry,
                scheme: str = DEFAULT_SCHEME) -> tuple[int, int, int, int, int]:
    return AddressMapper(geometry, scheme).map(physical_address)


class MemoryRequest:
    __slots__ = ("is_write", "address", "channel", "rank", "bank", "row", "column",
                 "core", "arrival", "seq", "completion", "load")

    def __init__(self, is_write, address, channel, rank, bank, row, column, core,
                 arrival, load=None):
        self.is_write = is_write
        self.address = address
        self.channel = channel
        self.rank = rank
        self.bank = bank
        self.row = row
        self.column = column
        self.core = core
        self.arrival = arrival
        self.seq = 0
        self.completion = None
        self.load = load

    @property
    def kind(self) -> str:
        return "Write" if self.is_write else "Read"

    def __repr__(self):
        return (f"MemoryRequest({self.kind}, ch={self.channel} ra={self.rank} "
                f"ba={self.bank} row={self.row} col={self.column} core={self.core} "
                f"t={self.arrival})")


def generate_command(request: MemoryRequest, bank: BankState) -> str:
    """Next command kind needed to make progress on `request`."""
    if bank.open_row is None:
        return ACT
    if bank.open_row == request.row:
        return WRITE if request.is_write else READ
    return PRE


@dataclass(frozen=True)
class ControllerConfig:
    row_policy: str = "auto"  # auto | open | closed
    read_queue: int = 64
    write_queue: int = 64
    write_high: int = 32
    write_low: int = 16
    mapping: str = DEFAULT_SCHEME
    refresh_groups: int = 8192
    max_postpone: int = 8
    starvation_bound: int = 1_000_000

    def policy_for(self, cores: int) -> str:
        if self.row_policy == "auto":
            return "open" if cores == 1 else "closed"
        return self.row_policy

    def problems(self) -> list[str]:
        out = []
        if self.row_policy not in ("auto", "open", "closed"):
            out.append(f"controller.row_policy must be auto, open or closed (got {self.row_policy!r})")
        if self.read_queue < 1 or self.write_queue < 1:
            out.append("controller queue sizes must be >= 1")
        if not 0 <= self.write_low < self.write_high <= self.write_queue:
            out.append("controller watermarks need 0 <= write_low < write_high <= write_queue")
        names = self.mapping.split(":")
        if sorted(names) != sorted(FIELDS):
            out.append(f"controller.mapping must be a permutation of {':'.join(FIELDS)}")
        if self.refresh_groups < 1 or self.max_postpone < 0:
            out.append("controller.refresh_groups must be >= 1 and max_postpone >= 0")
        return out


class ChannelController:
    """FR-FCFS controller for one channel.

    `tick(d)` issues at most one command at DRAM cycle `d` and sets `wake`
    to the next DRAM cycle at which something could become issuable, so the
    simulator may skip idle cycles without changing behavior.
    """

    def __init__(self, channel: int, geometry: DramGeometry, cfg: ControllerConfig,
                 variants: list[TimingParams], advisor, cores: int, ratio: int,
                 on_read_done: Optional[Callable] = None):
        self.channel = channel
        self.geometry = geometry
        self.cfg = cfg
        self.timing = variants[0]
        self.variants = variants
        self.advisor = advisor
        self.ratio = ratio
        self.closed = cfg.policy_for(cores) == "closed"
        self.on_read_done = on_read_done
        nr, nb = geometry.ranks_per_channel, geometry.banks_per_rank
        self.banks = [[BankState() for _ in range(nb)] for _ in range(nr)]
        self.opener = [[-1] * nb for _ in range(nr)]
        self.rq = [[[] for _ in range(nb)] for _ in range(nr)]
        self.wq = [[[] for _ in range(nb)] for _ in range(nr)]
        self.nread = 0
        self.nwrite = 0
        self.drain = False
        self.bus_free = NEVER
        self.refresh = [RefreshEngine(geometry.rows_per_bank, self.timing,
                                      cfg.refresh_groups, cfg.max_postpone, channel, r)
                        for r in range(nr)]
        self.log: list[DramCommand] = []
        self.wake = 0
        self.freed_slot = False
        self._seq = 0
        self.reset_stats()

    def reset_stats(self) -> None:
        self.acts = 0
        self.hits = 0
        self.reads_done = 0
        self.writes_done = 0
        self.max_latency = 0
        for table in getattr(self.advisor, "tables", ()):
            table.hits = 0
            table.lookups = 0

    # -- request intake -------------------------------------------------

    def can_accept(self, is_write: bool) -> bool:
        if is_write:
            return self.nwrite < self.cfg.write_queue
        return self.nread < self.cfg.read_queue

    def enqueue(self, req: MemoryRequest, now_cpu: int) -> None:
        self._seq += 1
        req.seq = self._seq
        if req.is_write:
            self.wq[req.rank][req.bank].append(req)
            self.nwrite += 1
            if self.nwrite >= self.cfg.write_high:
                self.drain = True
        else:
            self.rq[req.rank][req.bank].append(req)
            self.nread += 1
        d = -(-now_cpu // self.ratio)
        if d < self.wake:
            self.wake = d

    def pending(self) -> int:
        return self.nread + self.nwrite

    # -- scheduling -------------------------------------------------------

    def _has_hit(self, r: int, b: int, row: int) -> bool:
        for q in self.rq[r][b]:
            if q.row == row:
                return True
        for q in self.wq[r][b]:
            if q.row == row:
                return True
        return False

    def schedule(self, d: int):
        """Pick the FR-FCFS choice at cycle `d`.

        Returns (request or None, command kind, rank, bank) or None, plus the
        earliest future cycle worth re-checking.
        """
        wake = INF
        timing = self.timing
        banks = self.banks

        # Refresh has priority: close the rank, then REF.
        refreshing = None
        for r, eng in enumerate(self.refresh):
            if d < eng.next_due:
                wake = min(wake, eng.next_due)
                continue
            if refreshing is None:
                refreshing = set()
            refreshing.add(r)
            rank_banks = banks[r]
            ready = []
            n_open = 0
            ref_at = d
            for b, bank in enumerate(rank_banks):
                if bank.open_row is not None:
                    n_open += 1
                    t = bank.last_act + bank.active_timing.tRAS
                    if t <= d:
                        ready.append(b)
                    else:
                        wake = min(wake, t)
                else:
                    ref_at = max(ref_at, bank.last_pre + timing.tRP, bank.ref_until)
            if n_open == 0:
                if ref_at <= d:
                    return (None, REF, r, -1), wake
                wake = min(wake, ref_at)
            elif ready:
                if len(ready) == n_open and n_open > 1:
                    return (None, PREA, r, -1), wake
                return (None, PRE, r, ready[0]), wake

        use_writes = self.drain or (self.nread == 0 and self.nwrite > 0)
        queues = self.wq if use_writes else self.rq
        col_lead = timing.tCWL if use_writes else timing.tCL
        best_hit = None
        best_other = None
        other_kind = None
        for r in range(len(banks)):
            rank_banks = banks[r]
            blocked_act = refreshing is not None and r in refreshing
            for b, reqs in enumerate(queues[r]):
                if not reqs:
                    continue
                bank = rank_banks[b]
                open_row = bank.open_row
                if open_row is not None:
                    hit = None
                    for q in reqs:
                        if q.row == open_row:
                            hit = q
                            break
                    if hit is not None:
                        t = max(bank.last_act + bank.active_timing.tRCD, self.bus_free - col_lead)
                        if t <= d:
                            if best_hit is None or hit.seq < best_hit.seq:
                                best_hit = hit
                        else:
                            wake = min(wake, t)
                        continue
                    t = bank.last_act + bank.active_timing.tRAS
                    kind = PRE
                else:
                    if blocked_act:
                        continue
                    t = max(bank.last_pre + timing.tRP, bank.ref_until)
                    kind = ACT
                cand = reqs[0]
                if t <= d:
                    if best_other is None or cand.seq < best_other.seq:
                        best_other = cand
                        other_kind = kind
                else:
                    wake = min(wake, t)

        if best_hit is not None:
            kind = WRITE if best_hit.is_write else READ
            return (best_hit, kind, best_hit.rank, best_hit.bank), wake

        if self.closed:
            for r, rank_banks in enumerate(banks):
                for b, bank in enumerate(rank_banks):
                    if bank.open_row is None or self._has_hit(r, b, bank.open_row):
                        continue
                    t = bank.last_act + bank.active_timing.tRAS
                    if t <= d:
                        return (None, PRE, r, b), wake
                    wake = min(wake, t)

        if best_other is not None:
            return (best_other, other_kind, best_other.rank, best_other.bank), wake
        return None, wake

    def tick(self, d: int) -> Optional[DramCommand]:
        choice, wake = self.schedule(d)
        if choice is None:
            self.wake = wake
            return None
        self.wake = d + 1
        return self.issue(choice, d)

    # -- command issue --------------------------------------------------

    def _close(self, r: int, b: int, kind: str, d: int, now_cpu: int) -> None:
        bank = self.banks[r][b]
        self.advisor.on_precharge(self.opener[r][b], r, b, bank.open_row, now_cpu)
        self.banks[r][b] = apply(bank, DramCommand(kind, self.channel, r, b, None, None, d),
                                 d, self.timing)

    def issue(self, choice, d: int) -> DramCommand:
        req, kind, r, b = choice
        now_cpu = d * self.ratio
        ch = self.channel
        if kind == REF:
            cmd = self.refresh[r].refresh_tick(self.banks[r], d)
            assert cmd is not None
        elif kind == PREA:
            for bb, bank in enumerate(self.banks[r]):
                if bank.open_row is not None:
                    self._close(r, bb, PREA, d, now_cpu)
            cmd = DramCommand(PREA, ch, r, -1, None, None, d)
        elif kind == PRE:
            row = self.banks[r][b].open_row
            self._close(r, b, PRE, d, now_cpu)
            cmd = DramCommand(PRE, ch, r, b, row, None, d)
        elif kind == ACT:
            verdict = self.advisor.on_activate(req.core, r, b, req.row, now_cpu)
            timing = self.variants[verdict.variant]
            cmd = DramCommand(ACT, ch, r, b, req.row, None, d, timing.tRCD, timing.tRAS)
            self.banks[r][b] = apply(self.banks[r][b], cmd, d, timing)
            self.opener[r][b] = req.core
            self.acts += 1
            if verdict.hit:
                self.hits += 1
        else:
            cmd = DramCommand(kind, ch, r, b, req.row, req.column, d)
            self.banks[r][b] = apply(self.banks[r][b], cmd, d, self.timing)
            t = self.timing
            if req.is_write:
                self.wq[r][b].remove(req)
                full = self.nwrite >= self.cfg.write_queue
                self.nwrite -= 1
                if self.drain and self.nwrite <= self.cfg.write_low:
                    self.drain = False
                self.bus_free = d + t.tCWL + t.tBL
                req.completion = now_cpu
                self.writes_done += 1
            else:
                self.rq[r][b].remove(req)
                full = self.nread >= self.cfg.read_queue
                self.nread -= 1
                self.bus_free = d + t.tCL + t.tBL
                req.completion = (d + t.tCL + t.tBL) * self.ratio
                self.reads_done += 1
                if self.on_read_done is not None:
                    self.on_read_done(req)
            lat = req.completion - req.arrival
            if lat > self.max_latency:
                self.max_latency = lat
            if full:
                self.freed_slot = True
        self.log.append(cmd)
        return cmd

    def oldest_pending_age(self, now_cpu: int) -> int:
        oldest = INF
        for qs in (self.rq, self.wq):
            for rank_q in qs:
                for reqs in rank_q:
                    if reqs:
                        oldest = min(oldest, reqs[0].arrival)
        return 0 if oldest == INF else now_cpu - oldest
