"""Parameter sweeps: one simulation per axis value, run in a process pool
and aggregated in axis order."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

from .config import RunConfig
from .errors import ChargeSimError, ConfigError
from .metrics import SimReport
from .sim import run_simulate

AXES = ("entries", "duration", "advisor")


def axis_config(base: RunConfig, axis: str, value) -> RunConfig:
    if axis == "entries":
        return base.with_advisor(entries=int(value))
    if axis == "duration":
        return base.with_advisor(duration_ms=float(value))
    if axis == "advisor":
        return base.with_advisor(name=str(value))
    raise ConfigError(f"unknown sweep axis {axis!r} (choose from {', '.join(AXES)})")


def config_id(axis: str, value) -> str:
    return f"{axis}={value}"


def sweep_configs(base: RunConfig, axis: str, values: Sequence) -> list[tuple[str, RunConfig]]:
    """Build and validate every point up front so a bad value fails the whole
    sweep before any simulation starts."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    points, problems = [], []
    for v in values:
        cid = config_id(axis, v)
        try:
            cfg = axis_config(base, axis, v)
        except (TypeError, ValueError):
            problems.append(f"{cid}: not a valid {axis} value")
            continue
        problems += [f"{cid}: {p}" for p in cfg.problems()]
        points.append((cid, cfg))
    if problems:
        raise ConfigError(problems)
    return points


def _run_point(args) -> SimReport:
    cid, cfg = args
    try:
        return run_simulate(cfg)[0]
    except ChargeSimError as exc:
        # keep the exit-code class, name the failing point
        err = ChargeSimError(f"sweep point {cid} failed: {exc}")
        err.exit_code = exc.exit_code
        raise err from None


def run_sweep(base: RunConfig, axis: str, values: Sequence,
              workers: Optional[int] = None) -> list[tuple[str, RunConfig, SimReport]]:
    """Run one simulation per value. Results come back in `values` order
    whatever the worker count."""
    points = sweep_configs(base, axis, values)
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, len(points)))
    if workers == 1:
        reports = [_run_point(p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_point, points))
    return [(cid, cfg, rep) for (cid, cfg), rep in zip(points, reports)]


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(x) if isinstance(x, float) else str(x)


def sweep_header(cores: int, windows_ms: Sequence[float]) -> list[str]:
    return (["config_id", "advisor", "entries", "duration_ms"]
            + [f"ipc_core{i}" for i in range(cores)]
            + ["ws", "rmpkc", "hit_rate"]
            + [f"rltl_{w:g}ms" for w in windows_ms]
            + ["energy_nj"])


def sweep_row(cid: str, cfg: RunConfig, rep: SimReport) -> list:
    adv = cfg.advisor
    return ([cid, adv.name, adv.entries, adv.duration_ms] + list(rep.ipc)
            + [rep.weighted_speedup, rep.rmpkc, rep.hit_rate]
            + list(rep.rltl["fractions"]) + [rep.energy_nj["total"]])


def sweep_csv(results) -> str:
    """Comma-separated table with a header row; floats are written with
    repr so the table round-trips exactly."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    _, cfg0, rep0 = results[0]
    w.writerow(sweep_header(len(rep0.ipc), rep0.rltl["windows_ms"]))
    for cid, cfg, rep in results:
        w.writerow([_fmt(x) for x in sweep_row(cid, cfg, rep)])
    return buf.getvalue()


def read_sweep_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))
