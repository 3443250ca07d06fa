"""Command-log files: one DRAM command per line, cycles in DRAM clocks."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .dram import ACT, PRE, PREA, READ, REF, WRITE, DramCommand
from .errors import InputError, TraceParseError

HEADER = ("cycle", "kind", "channel", "rank", "bank", "row", "column", "trcd", "tras")
KINDS = (ACT, PRE, PREA, READ, WRITE, REF)


def _cell(v) -> str:
    return "" if v is None else str(v)


def format_command_log(logs) -> str:
    """`logs` is one command list per channel; output is merged by cycle,
    ties broken by channel."""
    rows = sorted((c for log in logs for c in log), key=lambda c: (c.cycle, c.channel))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for c in rows:
        w.writerow([c.cycle, c.kind, c.channel, c.rank, _cell(c.bank), _cell(c.row),
                    _cell(c.column), _cell(c.trcd), _cell(c.tras)])
    return buf.getvalue()


def parse_command_log(text: str) -> list[list[DramCommand]]:
    """Inverse of format_command_log; returns per-channel lists."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceParseError("empty command log", 1) from None
    if tuple(h.strip() for h in header) != HEADER:
        raise TraceParseError(f"expected header {','.join(HEADER)}", 1)
    by_channel: dict[int, list[DramCommand]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != len(HEADER):
            raise TraceParseError(f"expected {len(HEADER)} fields, got {len(row)}", lineno)
        kind = row[1].strip()
        if kind not in KINDS:
            raise TraceParseError(f"unknown command {kind!r}", lineno)
        try:
            vals = [int(x) if x.strip() else None for x in (row[0], *row[2:])]
        except ValueError:
            raise TraceParseError("non-integer field", lineno) from None
        cycle, ch, rank, bank, r, col, trcd, tras = vals
        if cycle is None or ch is None or rank is None:
            raise TraceParseError("cycle, channel and rank are required", lineno)
        by_channel.setdefault(ch, []).append(
            DramCommand(kind, ch, rank, bank, r, col, cycle, trcd, tras))
    return [by_channel[ch] for ch in sorted(by_channel)]


def write_command_log(path, logs) -> None:
    Path(path).write_text(format_command_log(logs))


def read_command_log(path) -> list[list[DramCommand]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read command log {path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise TraceParseError(f"command log {path} is not text: {exc.reason}") from None
    return parse_command_log(text)
