from dataclasses import replace

import pytest

from chargesim.errors import ChargeSimError, ConfigError
from chargesim.sim import run_simulate
from chargesim.sweep import (axis_config, read_sweep_csv, run_sweep, sweep_configs,
                             sweep_csv, sweep_row)
from chargesim.workloads import single_core_config

TRACE = "row_reuse:length=1200,bubbles=20,p=0.8,window=64,rows=4096"


@pytest.fixture(scope="module")
def base():
    cfg = single_core_config(TRACE, seed=5)
    return replace(cfg, cores=replace(cfg.cores, warmup_cycles=4000))


@pytest.fixture(scope="module")
def entries_sweep(base):
    return run_sweep(base, "entries", [8, 32, 128], workers=1)


def test_rows_equal_single_runs(base, entries_sweep):
    for cid, cfg, rep in entries_sweep:
        single, _ = run_simulate(axis_config(base, "entries", cfg.advisor.entries))
        assert rep.to_json() == single.to_json()
        assert sweep_row(cid, cfg, rep) == sweep_row(cid, cfg, single)


def test_csv_columns_and_values(entries_sweep):
    rows = read_sweep_csv(sweep_csv(entries_sweep))
    assert list(rows[0]) == ["config_id", "advisor", "entries", "duration_ms", "ipc_core0",
                             "ws", "rmpkc", "hit_rate", "rltl_0.125ms", "rltl_0.5ms",
                             "rltl_1ms", "rltl_8ms", "rltl_32ms", "energy_nj"]
    assert [r["config_id"] for r in rows] == ["entries=8", "entries=32", "entries=128"]  # [TRIVIAL]
    for row, (_, _, rep) in zip(rows, entries_sweep):
        assert float(row["hit_rate"]) == rep.hit_rate
        assert float(row["energy_nj"]) == rep.energy_nj["total"]


def test_hit_rate_grows_with_entries(entries_sweep):
    rates = [rep.hit_rate for _, _, rep in entries_sweep]
    assert rates == sorted(rates) and rates[0] < rates[-1]


def test_parallel_matches_serial(base, entries_sweep):
    par = run_sweep(base, "entries", [8, 32, 128], workers=2)
    assert sweep_csv(par) == sweep_csv(entries_sweep)


def test_duration_axis_selects_reduction_rows(base):
    pts = sweep_configs(base, "duration", [1, 4, 16])
    assert [c.advisor.duration_ms for _, c in pts] == [1.0, 4.0, 16.0]  # [TRIVIAL]
    v = base.reduction.variants(base.timing)
    trcd = [v[base.reduction.variant_for_duration(c.advisor.duration_ms)].tRCD for _, c in pts]
    assert trcd == sorted(trcd)


def test_all_bad_values_reported_before_running(base):
    with pytest.raises(ConfigError) as exc:
        sweep_configs(base, "entries", [7, 128, 33])
    assert len(exc.value.problems) == 2
    assert "entries=7" in exc.value.problems[0]


def test_unknown_axis_and_empty(base):
    with pytest.raises(ConfigError):
        sweep_configs(base, "ways", [1])
    with pytest.raises(ConfigError):
        sweep_configs(base, "entries", [])


def test_failing_point_identified(base):
    bad = replace(base, cores=replace(base.cores, warmup_cycles=10**8))
    with pytest.raises(ChargeSimError) as exc:
        run_sweep(bad, "advisor", ["none", "lldram"], workers=1)
    assert "advisor=none" in str(exc.value)
    assert exc.value.exit_code == 2


def test_failing_point_identified_across_processes(base):
    bad = replace(base, cores=replace(base.cores, warmup_cycles=10**8))
    with pytest.raises(ChargeSimError) as exc:
        run_sweep(bad, "entries", [32, 64], workers=2)
    assert "entries=32" in str(exc.value) and exc.value.exit_code == 2
