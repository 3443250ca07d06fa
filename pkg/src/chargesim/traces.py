"""Trace file format, synthetic generators and multi-core workload bundles.

Trace lines are ``<bubble_count> <R|W> <0xADDRESS>``; ``#`` lines are
comments.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from .controller import DEFAULT_SCHEME, AddressMapper
from .dram import DramGeometry
from .errors import ConfigError, InputError, TraceParseError

GENERATORS = ("stream", "random_uniform", "bank_conflict", "row_reuse")


class TraceRecord(NamedTuple):
    bubble_count: int
    kind: str  # "R" or "W"
    address: int

    @property
    def is_write(self) -> bool:
        return self.kind == "W"


def parse_trace(lines: Iterable[str]) -> list[TraceRecord]:
    records = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise TraceParseError(f"expected 3 fields, got {len(parts)}: {line!r}", lineno)
        bubbles, kind, addr = parts
        try:
            n = int(bubbles, 10)
        except ValueError:
            raise TraceParseError(f"bad bubble count {bubbles!r}", lineno) from None
        if n < 0:
            raise TraceParseError(f"negative bubble count {n}", lineno)
        if kind not in ("R", "W"):
            raise TraceParseError(f"access kind must be R or W, got {kind!r}", lineno)
        if not addr.lower().startswith("0x"):
            raise TraceParseError(f"address must be hex with 0x prefix: {addr!r}", lineno)
        try:
            a = int(addr, 16)
        except ValueError:
            raise TraceParseError(f"bad hex address {addr!r}", lineno) from None
        records.append(TraceRecord(n, kind, a))
    return records


def serialize_trace(records: Iterable[TraceRecord]) -> str:
    return "".join(f"{r.bubble_count} {r.kind} {r.address:#x}\n" for r in records)


def read_trace(path) -> list[TraceRecord]:
    try:
        with open(path, encoding="ascii") as fh:
            return parse_trace(fh)
    except OSError as exc:
        raise InputError(f"cannot read trace {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise TraceParseError(f"trace {path} is not ASCII text: {exc.reason}") from None


def write_trace(path, records: Iterable[TraceRecord]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(serialize_trace(records))


def instruction_count(records: list[TraceRecord]) -> int:
    return sum(r.bubble_count for r in records) + len(records)


_DEFAULTS = {
    "length": 5000,
    "bubbles": 10,
    "write_ratio": 0.0,
    "row_base": 0,
    "rows": 1024,
    "burst": 1,
    # bank_conflict
    "conflict_rows": 2,
    "bank": 0,
    # row_reuse
    "p": 0.5,
    "window": 32,
}


def _check_params(kind: str, params: dict, geometry: DramGeometry) -> dict:
    if kind not in GENERATORS:
        raise ConfigError(f"unknown generator {kind!r}; choose from {', '.join(GENERATORS)}")
    unknown = set(params) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown generator parameter(s): {', '.join(sorted(unknown))}")
    p = dict(_DEFAULTS)
    p.update(params)
    errs = []
    for key in ("length", "bubbles", "row_base", "rows", "burst", "conflict_rows",
                "bank", "window"):
        v = p[key]
        if not isinstance(v, int) or isinstance(v, bool):
            try:
                p[key] = v = int(v)
            except (TypeError, ValueError):
                errs.append(f"{key} must be an integer")
                continue
        if v < 0:
            errs.append(f"{key} must be >= 0")
    for key in ("p", "write_ratio"):
        try:
            p[key] = float(p[key])
        except (TypeError, ValueError):
            errs.append(f"{key} must be a number")
            continue
        if not 0.0 <= p[key] <= 1.0:
            errs.append(f"{key} must lie in [0, 1] (got {p[key]})")
    if not errs:
        if p["rows"] < 1 or p["burst"] < 1 or p["window"] < 1 or p["conflict_rows"] < 1:
            errs.append("rows, burst, window and conflict_rows must be >= 1")
        if p["row_base"] + p["rows"] > geometry.rows_per_bank:
            errs.append(f"row_base + rows exceeds rows_per_bank ({geometry.rows_per_bank})")
        if p["bank"] >= geometry.banks_per_rank:
            errs.append("bank out of range")
        if kind == "bank_conflict" and p["conflict_rows"] > p["rows"]:
            errs.append("conflict_rows must be <= rows")
    if errs:
        raise ConfigError(errs)
    return p


def gen_synthetic(kind: str, params: Optional[dict] = None, seed: int = 0,
                  geometry: Optional[DramGeometry] = None,
                  scheme: str = DEFAULT_SCHEME) -> list[TraceRecord]:
    """Deterministic synthetic trace; a pure function of its arguments.

    Every generator confines itself to rows [row_base, row_base + rows) so
    that cores of a bundle can be given disjoint regions. Bubble counts are
    uniform on [0, 2 * bubbles]. `burst` consecutive cache lines of the same
    row are emitted per visit.
    """
    geometry = geometry or DramGeometry()
    p = _check_params(kind, params or {}, geometry)
    mapper = AddressMapper(geometry, scheme)
    rng = random.Random(f"{kind}:{seed}")
    g = geometry
    n, burst = p["length"], p["burst"]
    row_base, rows = p["row_base"], p["rows"]
    cols = g.columns_per_row
    out: list[TraceRecord] = []

    def emit(ch, ra, ba, row, col):
        kind_ = "W" if p["write_ratio"] and rng.random() < p["write_ratio"] else "R"
        bub = rng.randint(0, 2 * p["bubbles"])
        out.append(TraceRecord(bub, kind_, mapper.compose(ch, ra, ba, row, col)))

    def visit(ch, ra, ba, row, col):
        for i in range(burst):
            if len(out) >= n:
                return
            emit(ch, ra, ba, row, (col + i) % cols)

    def random_location():
        return (rng.randrange(g.channels), rng.randrange(g.ranks_per_channel),
                rng.randrange(g.banks_per_rank), row_base + rng.randrange(rows))

    if kind == "stream":
        start = mapper.compose(0, 0, 0, row_base, 0)
        span = rows * g.channels * g.banks_per_rank * g.ranks_per_channel * g.row_buffer_bytes
        i = 0
        while len(out) < n:
            addr = start + (i * g.line_bytes) % span
            kind_ = "W" if p["write_ratio"] and rng.random() < p["write_ratio"] else "R"
            out.append(TraceRecord(rng.randint(0, 2 * p["bubbles"]), kind_, addr))
            i += 1
    elif kind == "random_uniform":
        while len(out) < n:
            visit(*random_location(), rng.randrange(cols))
    elif kind == "bank_conflict":
        k = p["conflict_rows"]
        i = 0
        while len(out) < n:
            visit(0, 0, p["bank"], row_base + i % k, rng.randrange(cols))
            i += 1
    else:  # row_reuse
        recent = deque(maxlen=p["window"])
        while len(out) < n:
            if recent and rng.random() < p["p"]:
                loc = recent[rng.randrange(len(recent))]
            else:
                loc = random_location()
            visit(*loc, rng.randrange(cols))
            recent.append(loc)
    return out


@dataclass(frozen=True)
class TraceSource:
    """Either a trace file or a generator invocation."""

    kind: str  # "file" or a generator name
    params: tuple = ()
    path: Optional[str] = None

    @classmethod
    def parse(cls, spec: str) -> "TraceSource":
        """Parse ``file:<path>`` or ``<generator>[:k=v,k=v]``."""
        spec = spec.strip()
        if spec.startswith("file:"):
            return cls("file", (), spec[5:])
        name, _, rest = spec.partition(":")
        params = []
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, val = item.partition("=")
            if not eq:
                raise ConfigError(f"bad generator parameter {item!r} in {spec!r}")
            params.append((key.strip(), _coerce(val.strip())))
        if name not in GENERATORS:
            raise ConfigError(f"unknown trace source {spec!r}")
        return cls(name, tuple(sorted(params)))

    def to_spec(self) -> str:
        if self.kind == "file":
            return f"file:{self.path}"
        if not self.params:
            return self.kind
        return self.kind + ":" + ",".join(f"{k}={v}" for k, v in self.params)

    def load(self, seed: int, core: int, geometry: DramGeometry,
             scheme: str = DEFAULT_SCHEME) -> list[TraceRecord]:
        if self.kind == "file":
            return read_trace(self.path)
        params = dict(self.params)
        # disjoint row regions per core unless pinned explicitly
        params.setdefault("row_base", core * int(params.get("rows", _DEFAULTS["rows"])))
        return gen_synthetic(self.kind, params, seed * 1000 + core, geometry, scheme)


def _coerce(val: str):
    for conv in (int, float):
        try:
            return conv(val)
        except ValueError:
            pass
    return val


@dataclass(frozen=True)
class WorkloadSpec:
    traces: tuple = ("row_reuse:length=100000",)
    quotas: tuple = ()  # per-core instruction quota; empty -> one trace pass

    @property
    def cores(self) -> int:
        return len(self.traces)

    def sources(self) -> list[TraceSource]:
        return [TraceSource.parse(s) for s in self.traces]

    def problems(self) -> list[str]:
        out = []
        if not self.traces:
            out.append("workload.traces must list at least one trace source")
        for s in self.traces:
            try:
                src = TraceSource.parse(s)
                if src.kind == "file" and not Path(src.path).is_file():
                    out.append(f"trace file not found: {src.path}")
            except ConfigError as exc:
                out.extend(exc.problems)
        if self.quotas and len(self.quotas) != len(self.traces):
            out.append("workload.quotas must have one entry per trace")
        if any(q < 1 for q in self.quotas):
            out.append("workload.quotas must be >= 1")
        return out

    def load(self, seed: int, geometry: DramGeometry, scheme: str = DEFAULT_SCHEME):
        return [src.load(seed, i, geometry, scheme)
                for i, src in enumerate(self.sources())]


def random_mix(catalog: list[str], cores: int, seed: int) -> tuple[str, ...]:
    """Assign a randomly chosen catalog entry to each core."""
    rng = random.Random(f"mix:{seed}")
    return tuple(catalog[rng.randrange(len(catalog))] for _ in range(cores))
