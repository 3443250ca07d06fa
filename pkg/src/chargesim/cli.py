"""Command-line entry point: ``chargesim {simulate,sweep,rltl,gen-trace}``.

Exit codes: 0 success, 2 configuration error, 3 input or parse error,
4 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import __version__
from .cmdlog import read_command_log, write_command_log
from .config import RunConfig, load_config
from .errors import ChargeSimError, ConfigError, InputError, TraceParseError
from .metrics import compute_rltl, merge_events, row_events
from .sim import Simulation, run_simulate
from .sweep import AXES, run_sweep, sweep_csv
from .traces import TraceSource, WorkloadSpec, read_trace, serialize_trace, write_trace

log = logging.getLogger("chargesim")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer: {text!r}")
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg.validate()


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ----------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.emit_command_log and args.out is None:
        raise ConfigError("--emit-command-log needs --out")
    cfg = _load(args)
    report, sim = run_simulate(cfg)
    text = report.to_json()
    if args.out is None:
        sys.stdout.write(text)
        return 0
    out = _outdir(args)
    (out / "report.json").write_text(text)
    if args.emit_command_log:
        write_command_log(out / "commands.csv", sim.command_logs())
    print(f"cycles={report.cycles} ipc={','.join(f'{x:.4f}' for x in report.ipc)} "
          f"hit_rate={report.hit_rate:.4f} energy_nj={report.energy_nj['total']:.1f}")
    print(f"wrote {out / 'report.json'}")
    return 0


def cmd_sweep(args) -> int:
    from .plotting import plot_sweep

    cfg = _load(args)
    axis, values = None, None
    for name in AXES:
        v = getattr(args, name)
        if v is not None:
            axis, values = name, v
    results = run_sweep(cfg, axis, values, args.workers)
    out = _outdir(args)
    (out / "sweep.csv").write_text(sweep_csv(results))
    plot_sweep(results, axis, out / "sweep.png")
    sys.stdout.write(sweep_csv(results))
    return 0


def _looks_like_command_log(path: Path) -> bool:
    try:
        with open(path, encoding="ascii", errors="replace") as fh:
            first = fh.readline()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    return first.startswith("cycle,")


def rltl_from_input(path, windows, cfg: RunConfig) -> dict:
    """Histogram from a command log, or from a CPU trace simulated on the
    baseline system (advisor none, no warm-up)."""
    path = Path(path)
    ratio = cfg.cores.clock_ratio
    if _looks_like_command_log(path):
        logs = read_command_log(path)
        events = merge_events([row_events(lg, ratio) for lg in logs])
    else:
        trace = read_trace(path)
        if not trace:
            raise TraceParseError("trace has no records")
        run = replace(cfg, workload=WorkloadSpec(traces=(f"file:{path}",)), alone_ipc=(),
                      cores=replace(cfg.cores, warmup_cycles=0)).with_advisor(name="none")
        sim = Simulation(run.validate(), traces=[trace])
        sim.run()
        events = sim.events()
    return compute_rltl(events, windows, cfg.cycles_per_ms, 0).as_dict()


def rltl_csv(hist: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["window_ms", "window_cycles", "count", "total", "fraction"])
    for wm, wc, n, f in zip(hist["windows_ms"], hist["window_cycles"], hist["counts"],
                            hist["fractions"]):
        w.writerow([repr(float(wm)), wc, n, hist["total"], repr(f)])
    return buf.getvalue()


def cmd_rltl(args) -> int:
    from .plotting import plot_rltl

    cfg = _load(args)
    windows = args.windows or list(cfg.metrics.rltl_windows_ms)
    if any(w <= 0 for w in windows) or any(b <= a for a, b in zip(windows, windows[1:])):
        raise ConfigError("--windows must be positive and strictly increasing")
    hist = rltl_from_input(args.input, windows, cfg)
    text = rltl_csv(hist)
    out = _outdir(args)
    (out / "rltl.csv").write_text(text)
    plot_rltl(hist, out / "rltl.png", title=Path(args.input).name)
    sys.stdout.write(text)
    return 0


def cmd_gen_trace(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    src = TraceSource.parse(args.spec)
    if src.kind == "file":
        raise ConfigError("gen-trace needs a generator spec, not a file")
    seed = args.seed if args.seed is not None else cfg.seed
    records = src.load(seed, 0, cfg.geometry, cfg.controller.mapping)
    if args.out is None or args.out == "-":
        sys.stdout.write(serialize_trace(records))
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_trace(args.out, records)
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chargesim",
                                description="Trace-driven DDR3 simulator with "
                                            "ChargeCache, NUAT and LL-DRAM timing advisors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", help="INI config file (or a report.json to rerun)")
        sp.add_argument("--seed", type=_seed, help="override the config seed")
        sp.add_argument("--out", help=out_help)

    s = sub.add_parser("simulate", help="run one configuration and emit a report")
    common(s, "output directory for report.json (default: print the report)")
    s.add_argument("--emit-command-log", action="store_true",
                   help="also write commands.csv (DRAM-cycle timestamps)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run one simulation per value of an axis")
    common(s, "output directory for sweep.csv and sweep.png (default: .)")
    s.add_argument("--workers", type=int, default=None,
                   help="parallel simulations (default: one per processor)")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--entries", type=_int_list, help="HCRAC entry counts, e.g. 32,64,128")
    g.add_argument("--duration", type=_float_list, help="caching durations in ms, e.g. 1,4,16")
    g.add_argument("--advisor", type=_str_list,
                   help="advisor names, e.g. none,nuat,chargecache,chargecache+nuat,lldram")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("rltl", help="row-level temporal locality of a trace or command log")
    s.add_argument("input", help="CPU trace file or commands.csv")
    common(s, "output directory for rltl.csv and rltl.png (default: .)")
    s.add_argument("--windows", type=_float_list, help="windows in ms (comma-separated)")
    s.set_defaults(func=cmd_rltl)

    s = sub.add_parser("gen-trace", help="write a synthetic trace")
    s.add_argument("spec", help="generator spec, e.g. row_reuse:length=1000,p=0.8")
    common(s, "trace file to write (default: stdout)")
    s.set_defaults(func=cmd_gen_trace)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("sweep", "rltl") and args.out is None:
        args.out = "."
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except ChargeSimError as exc:
        print(f"chargesim: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
