"""Bundled synthetic workload suite (stand-ins for SPEC/TPC/STREAM traces)."""

from __future__ import annotations

from dataclasses import replace

from .config import RunConfig
from .core import CoreConfig
from .dram import DramGeometry
from .traces import WorkloadSpec, random_mix

# Desk-scale warm-up: long enough to populate the HCRAC.
SUITE_WARMUP = 20_000

SINGLE_CORE = {
    "stream": "stream:length=6000,bubbles=20",
    "random": "random_uniform:length=4000,bubbles=20,rows=65536",
    "conflict2": "bank_conflict:length=4000,bubbles=60,conflict_rows=2",
    "conflict8": "bank_conflict:length=4000,bubbles=60,conflict_rows=8",
    "reuse_hot": "row_reuse:length=5000,bubbles=20,p=0.9,window=16,rows=65536",
    "reuse_mid": "row_reuse:length=5000,bubbles=20,p=0.7,window=64,rows=65536",
    "reuse_wide": "row_reuse:length=5000,bubbles=20,p=0.8,window=256,rows=65536",
    "reuse_burst": "row_reuse:length=5000,bubbles=20,p=0.8,window=48,burst=4,rows=65536",
}

# Generators assigned at random to the cores of multi-programmed bundles.
MIX_CATALOG = (
    "stream:length=2500,bubbles=60,burst=1",
    "random_uniform:length=2500,bubbles=60",
    "row_reuse:length=2500,bubbles=60,p=0.8,window=32",
    "row_reuse:length=2500,bubbles=60,p=0.6,window=96",
    "bank_conflict:length=2500,bubbles=60,conflict_rows=4",
    "row_reuse:length=2500,bubbles=60,p=0.9,window=16,burst=2",
)

REUSE_HEAVY = ("conflict2", "conflict8", "reuse_hot", "reuse_mid", "reuse_wide", "reuse_burst")


def single_core_config(trace: str, seed: int = 1, **advisor) -> RunConfig:
    cfg = RunConfig(
        geometry=DramGeometry(channels=1),
        cores=CoreConfig(warmup_cycles=SUITE_WARMUP),
        workload=WorkloadSpec(traces=(trace,)),
        seed=seed,
    )
    return cfg.with_advisor(**advisor) if advisor else cfg


def multi_core_config(traces, seed: int = 1, **advisor) -> RunConfig:
    cfg = RunConfig(
        geometry=DramGeometry(channels=2),
        cores=CoreConfig(warmup_cycles=SUITE_WARMUP),
        workload=WorkloadSpec(traces=tuple(traces)),
        seed=seed,
    )
    return cfg.with_advisor(**advisor) if advisor else cfg


def mix8(seed: int = 7) -> tuple:
    return random_mix(list(MIX_CATALOG), 8, seed)


def reuse8() -> tuple:
    return tuple(MIX_CATALOG[i] for i in (2, 5, 4, 2, 5, 4, 2, 5))


def bundled_suite(seed: int = 1) -> dict[str, RunConfig]:
    """Name -> baseline config (advisor none) for every bundled workload."""
    suite = {name: single_core_config(t, seed, name="none") for name, t in SINGLE_CORE.items()}
    suite["mix8"] = multi_core_config(mix8(), seed, name="none")
    suite["reuse8"] = multi_core_config(reuse8(), seed, name="none")
    return suite


def with_advisor(cfg: RunConfig, name: str) -> RunConfig:
    return cfg.with_advisor(name=name)
