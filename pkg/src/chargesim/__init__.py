"""Trace-driven DDR3 simulator for activation-latency reduction of
recently precharged rows (ChargeCache), with NUAT and low-latency DRAM
comparison points."""

__version__ = "0.1.0"
