import json
from dataclasses import replace

import pytest

from chargesim.config import RunConfig
from chargesim.dram import ACT, PRE, READ, REF, DramCommand
from chargesim.errors import ConfigError
from chargesim.sim import Simulation, check_invariants, run_simulate
from chargesim.traces import TraceRecord, WorkloadSpec
from chargesim.validate import validate_log
from chargesim.workloads import multi_core_config, single_core_config

REUSE = "row_reuse:length=1500,bubbles=20,p=0.8,window=32,rows=4096"
CONFLICT = "bank_conflict:length=1200,bubbles=60,conflict_rows=2"
STREAM = "stream:length=1500,bubbles=20"


def small(trace=REUSE, warmup=5000, **advisor):
    cfg = single_core_config(trace, seed=3, **advisor)
    return replace(cfg, cores=replace(cfg.cores, warmup_cycles=warmup))


def state(sim):
    return (json.dumps([[tuple(c) for c in ctrl.log] for ctrl in sim.ctrls]),
            [(c.retired, c.finish_cycle) for c in sim.cores])


class TestWarmup:
    def test_zero_warmup_equals_none(self):
        a = Simulation(small(warmup=0))
        a.run()
        b = Simulation(small(warmup=0))
        b.run_until()
        assert state(a) == state(b)

    def test_stats_reset_but_hcrac_kept(self):
        sim = Simulation(small(warmup=20_000))
        sim.warmup(20_000)
        ctrl = sim.ctrls[0]
        assert ctrl.acts == ctrl.hits == 0
        assert all(t.hits == t.lookups == 0 for t in ctrl.advisor.tables)
        assert ctrl.advisor.occupancy() > 0
        assert sim.cores[0].measured_instructions == 0
        assert len(ctrl.log) > 0  # command log keeps warm-up commands

    def test_same_seed_same_post_warmup_state(self):
        a, b = Simulation(small()), Simulation(small())
        a.warmup(5000)
        b.warmup(5000)
        assert state(a) == state(b)
        assert a.ctrls[0].advisor.tables[0].tags == b.ctrls[0].advisor.tables[0].tags

    def test_warmup_longer_than_trace_rejected(self):
        with pytest.raises(ConfigError):
            Simulation(small(trace="stream:length=10", warmup=10**6)).run()


class TestRuns:
    def test_deterministic_reports(self):
        a, _ = run_simulate(small())
        b, _ = run_simulate(small())
        assert a.to_json() == b.to_json()

    def test_seed_changes_result(self):
        a, _ = run_simulate(small())
        b, _ = run_simulate(replace(small(), seed=4))
        assert a.to_json() != b.to_json()

    def test_lldram_not_slower_than_baseline_on_conflicts(self):
        base, _ = run_simulate(small(CONFLICT, name="none"))
        ll, _ = run_simulate(small(CONFLICT, name="lldram"))
        assert ll.cycles <= base.cycles
        assert ll.hit_rate == 1.0  # [TRIVIAL]

    def test_stream_has_no_hits(self):
        base, _ = run_simulate(small(STREAM, name="none"))
        cc, _ = run_simulate(small(STREAM, name="chargecache"))
        assert cc.hit_rate < 0.01
        assert abs(cc.ipc[0] - base.ipc[0]) / base.ipc[0] < 0.01

    def test_hits_bounded_by_rltl_at_duration(self):
        rep, _ = run_simulate(small())
        inv = rep.invariants
        assert 0 < inv["hcrac_hits"] <= inv["hits_within_duration_bound"]
        assert inv["max_hcrac_residency"] < inv["hcrac_duration"]

    def test_report_fields(self):
        rep, _ = run_simulate(small())
        assert rep.instructions[0] > 0 and rep.cycles > 0
        assert rep.ipc[0] == pytest.approx(rep.instructions[0] / rep.cycles)
        assert rep.weighted_speedup is not None
        assert rep.rmpkc == pytest.approx(1000 * rep.activations / rep.cycles)
        assert rep.energy_nj["total"] > 0
        assert rep.storage["per_core_bytes"] == 336  # [DERIVED] one channel
        assert rep.refresh_locality["retention_fraction"] == 1.0  # [DERIVED]
        assert RunConfig.from_dict(rep.config) == small()

    def test_single_read_round_trip(self):
        cfg = replace(small(warmup=0), workload=WorkloadSpec(traces=("stream:length=1",)))
        sim = Simulation(cfg, traces=[[TraceRecord(0, "R", 0x4000)]])
        sim.run()
        t = cfg.timing
        assert sim.ctrls[0].max_latency >= (t.tRCD + t.tCL + t.tBL) * 5  # [DERIVED]

    def test_multicore_reaches_quotas(self):
        cfg = multi_core_config([REUSE, CONFLICT], seed=2, name="chargecache")
        cfg = replace(cfg, cores=replace(cfg.cores, warmup_cycles=2000),
                      workload=replace(cfg.workload, quotas=(20_000, 20_000)))
        rep, sim = run_simulate(cfg)
        assert all(c.retired >= 20_000 for c in sim.cores)
        assert len(rep.ipc) == 2 and 0 < rep.weighted_speedup < 2.5
        assert sim.ctrls[0].closed

    def test_long_run_refreshes_on_schedule(self):
        cfg = small(trace="random_uniform:length=400,bubbles=4000", warmup=0)
        rep, sim = run_simulate(cfg)
        tREFI = cfg.timing.tREFI
        expect = (sim.end_cycle // 5) // tREFI
        assert abs(rep.command_counts[REF] - expect) <= 1
        assert rep.invariants["late_refreshes"] == 0


class TestValidator:
    def run_log(self, advisor="chargecache"):
        _, sim = run_simulate(small(CONFLICT, name=advisor))
        return sim, list(sim.ctrls[0].log)

    def check(self, sim, log):
        return validate_log(log, sim.variants[0], {(v.tRCD, v.tRAS) for v in sim.variants})

    @pytest.mark.parametrize("advisor", ["none", "chargecache", "nuat", "chargecache+nuat",
                                         "lldram"])
    def test_clean_runs(self, advisor):
        sim, log = self.run_log(advisor)
        assert self.check(sim, log) == []

    def test_catches_early_read(self):
        sim, log = self.run_log()
        i = next(i for i, c in enumerate(log) if c.kind == READ and log[i - 1].kind == ACT)
        c = log[i]
        log[i] = c._replace(cycle=log[i - 1].cycle + 1)
        assert {v.constraint for v in self.check(sim, log)} >= {"tRCD"}

    def test_catches_early_precharge(self):
        sim, log = self.run_log("none")
        i = next(i for i, c in enumerate(log) if c.kind == PRE)
        act = max(j for j in range(i) if log[j].kind == ACT)
        log[i] = log[i]._replace(cycle=log[act].cycle + 10)
        log.sort(key=lambda c: c.cycle)
        assert "tRAS" in {v.constraint for v in self.check(sim, log)}

    def test_catches_unknown_variant(self):
        sim, log = self.run_log()
        i = next(i for i, c in enumerate(log) if c.kind == ACT)
        log[i] = log[i]._replace(trcd=3, tras=9)
        assert "variant" in {v.constraint for v in self.check(sim, log)}

    def test_catches_missing_refresh(self):
        # needs a run spanning more than max_postpone refresh intervals
        _, sim = run_simulate(small(trace="random_uniform:length=400,bubbles=4000", warmup=0))
        log = [c for c in sim.ctrls[0].log if c.kind != REF]
        assert self.check(sim, sim.ctrls[0].log) == []
        assert "tREFI" in {v.constraint for v in self.check(sim, log)}

    def test_invariant_violation_raised(self):
        rep, sim = run_simulate(small())
        sim.ctrls[0].log.insert(1, DramCommand(READ, 0, 0, 0, 12345, 0, sim.ctrls[0].log[0].cycle))
        assert check_invariants(sim, rep)
