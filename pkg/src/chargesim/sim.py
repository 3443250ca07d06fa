"""Simulation driver: cores, per-channel controllers and advisors on one
CPU clock, with idle-cycle skipping."""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import replace
from typing import Optional

from .advisor import build_advisor, storage_cost, entry_size_bits
from .config import RunConfig
from .controller import AddressMapper, ChannelController, MemoryRequest
from .core import Core
from .dram import ACT, PRE, PREA, READ, REF, WRITE, DramCommand
from .errors import ConfigError, InvariantViolation
from .metrics import (RefreshHistory, SimReport, compute_energy, compute_refresh_locality,
                      compute_rltl, merge_events, rmpkc, row_events, weighted_speedup)
from .traces import TraceRecord, instruction_count
from .validate import validate_log

log = logging.getLogger(__name__)

INF = float("inf")


class Simulation:
    def __init__(self, config: RunConfig, traces: Optional[list] = None,
                 quotas: Optional[list] = None, replay: Optional[bool] = None):
        config.validate()
        self.config = config
        g = config.geometry
        self.ratio = config.cores.clock_ratio
        if traces is None:
            traces = config.workload.load(config.seed, g, config.controller.mapping)
        self.traces = traces
        n = len(traces)
        if quotas is None:
            quotas = list(config.workload.quotas) or [instruction_count(t) for t in traces]
        if replay is None:
            # a lone core stops at trace end; bundles replay until all reach quota
            replay = n > 1 or any(q > instruction_count(t) for q, t in zip(quotas, traces))
        self.mapper = AddressMapper(g, config.controller.mapping)
        self.variants = config.reduction.variants(config.timing)
        self.cores = [Core(i, t, config.cores.issue_width, config.cores.window,
                           config.cores.mshrs, quotas[i], replay)
                      for i, t in enumerate(traces)]
        self.ctrls: list[ChannelController] = []
        for ch in range(g.channels):
            ctrl = ChannelController(ch, g, config.controller, self.variants, None, n,
                                     self.ratio, self._read_issued)
            ctrl.advisor = build_advisor(config.advisor, config.reduction, n,
                                         config.cores.cpu_freq_mhz,
                                         self._refresh_lookup(ctrl))
            self.ctrls.append(ctrl)
        self.completions: list = []
        self._cseq = 0
        self.now = 0
        self.measure_start = 0

    def _refresh_lookup(self, ctrl):
        ratio = self.ratio

        def last_refresh(rank, row):
            return ctrl.refresh[rank].last_refresh(row) * ratio
        return last_refresh

    # -- port used by cores ------------------------------------------------

    def send(self, core_id: int, rec: TraceRecord, now: int, load) -> bool:
        ch, ra, ba, row, col = self.mapper.map(rec.address)
        ctrl = self.ctrls[ch]
        is_write = rec.kind == "W"
        if not ctrl.can_accept(is_write):
            return False
        ctrl.enqueue(MemoryRequest(is_write, rec.address, ch, ra, ba, row, col, core_id,
                                   now, load), now)
        return True

    def _read_issued(self, req: MemoryRequest) -> None:
        self._cseq += 1
        heapq.heappush(self.completions, (req.completion, self._cseq, req))

    # -- main loop --------------------------------------------------------

    def run_until(self, limit: float = INF, stop_when_done: bool = True) -> None:
        """Advance until CPU cycle `limit` (exclusive) or all cores finish."""
        cores = self.cores
        ctrls = self.ctrls
        ratio = self.ratio
        heap = self.completions
        now = self.now
        while True:
            if stop_when_done and all(c.finish_cycle is not None for c in cores):
                break
            t = min(c.wake for c in cores)
            if heap and heap[0][0] < t:
                t = heap[0][0]
            for ctrl in ctrls:
                w = ctrl.wake * ratio
                if w < t:
                    t = w
            if t < now:
                t = now
            if t >= limit:
                now = limit
                break
            if t == INF:
                raise InvariantViolation("simulation deadlocked: no pending events")
            now = t
            while heap and heap[0][0] <= now:
                req = heapq.heappop(heap)[2]
                core = cores[req.core]
                core.complete(req.load)
                if core.wake > now:
                    core.wake = now
            for core in cores:
                if core.wake <= now:
                    core.wake = now + 1 if core.tick(now, self) else INF
            if now % ratio == 0:
                d = now // ratio
                for ctrl in ctrls:
                    if ctrl.wake <= d:
                        ctrl.tick(d)
                    if ctrl.freed_slot:
                        ctrl.freed_slot = False
                        for core in cores:
                            if core.wake == INF:
                                core.wake = now + 1
            now += 1
        self.now = now

    def warmup(self, cycles: int) -> None:
        """Fast-forward `cycles` CPU cycles, then zero all statistics while
        keeping bank, refresh and advisor state."""
        if cycles > 0:
            self.run_until(self.now + cycles, stop_when_done=False)
        self.measure_start = self.now
        done = [c.id for c in self.cores if c.finish_cycle is not None]
        if done:
            raise ConfigError(f"warm-up of {cycles} cycles consumes the whole quota of "
                              f"core(s) {done}; shorten warm-up or lengthen the trace")
        for c in self.cores:
            c.reset_stats(self.now)
        for ctrl in self.ctrls:
            ctrl.reset_stats()

    def run(self, warmup_cycles: Optional[int] = None) -> None:
        if warmup_cycles is None:
            warmup_cycles = self.config.cores.warmup_cycles
        self.warmup(warmup_cycles)
        self.run_until()

    # -- results ------------------------------------------------------------

    @property
    def end_cycle(self) -> int:
        return max(c.finish_cycle for c in self.cores)

    def command_logs(self) -> list[list[DramCommand]]:
        return [c.log for c in self.ctrls]

    def events(self):
        return merge_events([row_events(c.log, self.ratio) for c in self.ctrls])

    def refresh_history(self) -> RefreshHistory:
        ratio = self.ratio
        init, refs = {}, {}
        for ctrl in self.ctrls:
            for eng in ctrl.refresh:
                key = (ctrl.channel, eng.rank)
                init[key] = [s * ratio for s in eng.initial_stamps()]
                refs[key] = [c.cycle * ratio for c in ctrl.log
                             if c.kind == REF and c.rank == eng.rank]
        rows_per_ref = self.ctrls[0].refresh[0].rows_per_ref
        return RefreshHistory(rows_per_ref, init, refs)

    def advisor_residency(self) -> Optional[int]:
        worst = None
        for ctrl in self.ctrls:
            adv = ctrl.advisor
            if getattr(adv, "uses_hcrac", False):
                r = adv.max_residency(self.now)
                worst = r if worst is None else max(worst, r)
        return worst

    def advisor_duration(self) -> Optional[int]:
        for ctrl in self.ctrls:
            tables = getattr(ctrl.advisor, "tables", None)
            if tables:
                return tables[0].duration
        return None

    def report(self, alone_ipc: Optional[list] = None) -> SimReport:
        cfg = self.config
        g = cfg.geometry
        start, end = self.measure_start, self.end_cycle
        cycles = end - start
        ipc = [c.ipc() for c in self.cores]
        acts = sum(c.acts for c in self.ctrls)
        hits = sum(c.hits for c in self.ctrls)
        events = self.events()
        cpm = cfg.cycles_per_ms
        hist = compute_rltl(events, cfg.metrics.rltl_windows_ms, cpm, start)
        duration = self.advisor_duration()
        hit_bound = cc_hits = None
        if duration is not None:
            hit_bound = compute_rltl(events, (duration / cpm,), cpm, start).counts[0]
            cc_hits = sum(t.hits for c in self.ctrls for t in c.advisor.tables)
        refresh_window = int(round(cfg.metrics.refresh_window_ms * cpm))
        history = self.refresh_history()
        retention = int(round(64.0 * cpm))
        loc = compute_refresh_locality(events, history, refresh_window, start)
        loc_full = compute_refresh_locality(events, history, retention, start)

        counts = {k: 0 for k in (ACT, PRE, PREA, READ, WRITE, REF)}
        d_start = -(-start // self.ratio)
        d_end = -(-end // self.ratio)
        for ctrl in self.ctrls:
            for c in ctrl.log:
                if d_start <= c.cycle < d_end:
                    counts[c.kind] += 1
        adv_mw = cfg.advisor.power_mw if getattr(self.ctrls[0].advisor, "uses_hcrac", False) else 0.0
        energy = compute_energy(self.command_logs(), d_start, d_end, cfg.energy,
                                g.ranks_per_channel, cfg.timing.tck_ns, adv_mw)

        ws = None
        if alone_ipc is not None:
            ws = weighted_speedup(ipc, list(alone_ipc))

        bits = storage_cost(len(self.cores), g.channels, cfg.advisor.entries, g, cfg.advisor.ways)
        storage = {
            "entry_size_bits": entry_size_bits(g.ranks_per_channel, g.banks_per_rank,
                                               g.rows_per_bank),
            "total_bits": bits,
            "total_bytes": bits // 8,
            "per_core_bytes": bits // 8 // len(self.cores),
        }
        residency = self.advisor_residency()
        invariants = {
            "max_hcrac_residency": residency,
            "hcrac_duration": duration,
            "hcrac_hits": cc_hits,
            "hits_within_duration_bound": hit_bound,
            "max_request_latency": max(c.max_latency for c in self.ctrls),
            "starvation_bound": cfg.controller.starvation_bound,
            "late_refreshes": sum(e.late_refreshes for c in self.ctrls for e in c.refresh),
            "max_refresh_lateness": max(e.max_lateness for c in self.ctrls for e in c.refresh),
        }
        return SimReport(
            cycles=cycles,
            instructions=[c.measured_instructions for c in self.cores],
            ipc=ipc,
            weighted_speedup=ws,
            alone_ipc=list(alone_ipc) if alone_ipc is not None else None,
            rmpkc=rmpkc(acts, cycles),
            activations=acts,
            advisor_hits=hits,
            hit_rate=hits / acts if acts else 0.0,
            rltl=hist.as_dict(),
            refresh_locality={"window_ms": cfg.metrics.refresh_window_ms, "fraction": loc,
                              "retention_fraction": loc_full},
            command_counts=counts,
            energy_nj=energy,
            storage=storage,
            invariants=invariants,
            config=cfg.to_dict(),
            seed=cfg.seed,
        )


def check_invariants(sim: Simulation, report: SimReport) -> list[str]:
    """Per-run invariant checks; returns a list of violations."""
    out = []
    allowed = {(v.tRCD, v.tRAS) for v in sim.variants}
    for ctrl in sim.ctrls:
        for v in validate_log(ctrl.log, sim.variants[0], allowed,
                              sim.config.geometry.ranks_per_channel,
                              sim.config.geometry.banks_per_rank,
                              sim.config.controller.max_postpone):
            out.append(f"channel {ctrl.channel}: {v}")
    inv = report.invariants
    if inv["max_hcrac_residency"] is not None and inv["max_hcrac_residency"] >= inv["hcrac_duration"]:
        out.append(f"HCRAC residency {inv['max_hcrac_residency']} >= duration {inv['hcrac_duration']}")
    if inv["hcrac_hits"] is not None and inv["hcrac_hits"] > inv["hits_within_duration_bound"]:
        out.append("advisor hits exceed activations re-opened within the caching duration")
    fr = report.rltl["counts"]
    if any(b < a for a, b in zip(fr, fr[1:])):
        out.append("RLTL not monotone in window size")
    if inv["max_request_latency"] > inv["starvation_bound"]:
        out.append(f"request latency {inv['max_request_latency']} exceeds starvation bound")
    return out


_ALONE_CACHE: dict = {}


def alone_ipcs(config: RunConfig, traces: list) -> list[float]:
    """IPC of each trace run alone on the baseline (no advisor) system."""
    out = []
    quotas = list(config.workload.quotas) or [instruction_count(t) for t in traces]
    base = config.with_advisor(name="none")
    for i, trace in enumerate(traces):
        key = (json.dumps(base.to_dict(), sort_keys=True), config.workload.traces[i],
               quotas[i], i)
        if key not in _ALONE_CACHE:
            sim = Simulation(base, [trace], [quotas[i]])
            sim.run()
            _ALONE_CACHE[key] = sim.cores[0].ipc()
        out.append(_ALONE_CACHE[key])
    return out


def run_simulate(config: RunConfig, check: bool = True,
                 with_alone: bool = True) -> tuple[SimReport, Simulation]:
    """Warm up, run every core to its quota and build the report.

    With `check`, the command log, HCRAC residency and scheduling bounds
    are validated and any violation raises InvariantViolation.
    """
    sim = Simulation(config)
    sim.run()
    alone = None
    if config.alone_ipc:
        alone = list(config.alone_ipc)
    elif with_alone:
        if config.advisor.name == "none" and len(sim.cores) == 1:
            alone = [sim.cores[0].ipc()]
        else:
            alone = alone_ipcs(config, sim.traces)
    report = sim.report(alone)
    if check:
        problems = check_invariants(sim, report)
        if problems:
            raise InvariantViolation("; ".join(problems[:10]))
    return report, sim
