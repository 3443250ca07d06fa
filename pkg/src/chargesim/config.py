"""Run configuration: a sectioned key-value (INI) file.

Every default mirrors the simulated DDR3-1600 system; desk-scale values are
used only where the original methodology would take hours (warm-up length,
instruction quotas).
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .advisor import AdvisorConfig, ReductionTable
from .controller import ControllerConfig
from .core import CoreConfig
from .dram import DramGeometry, TimingParams
from .errors import ConfigError
from .metrics import DEFAULT_WINDOWS_MS, EnergyModel
from .traces import WorkloadSpec


@dataclass(frozen=True)
class MetricsConfig:
    rltl_windows_ms: tuple = DEFAULT_WINDOWS_MS
    refresh_window_ms: float = 8.0

    def problems(self) -> list[str]:
        out = []
        w = self.rltl_windows_ms
        if not w or any(x <= 0 for x in w) or any(b <= a for a, b in zip(w, w[1:])):
            out.append("metrics.rltl_windows_ms must be positive and strictly increasing")
        if self.refresh_window_ms <= 0:
            out.append("metrics.refresh_window_ms must be positive")
        return out


@dataclass(frozen=True)
class RunConfig:
    geometry: DramGeometry = field(default_factory=DramGeometry)
    timing: TimingParams = field(default_factory=TimingParams)
    reduction: ReductionTable = field(default_factory=ReductionTable)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    advisor: AdvisorConfig = field(default_factory=AdvisorConfig)
    cores: CoreConfig = field(default_factory=CoreConfig)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    energy: EnergyModel = field(default_factory=EnergyModel)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    seed: int = 1
    alone_ipc: tuple = ()

    def problems(self) -> list[str]:
        out = []
        out += self.geometry.problems()
        out += self.timing.problems()
        out += self.reduction.problems(self.timing)
        out += self.controller.problems()
        out += self.advisor.problems(self.reduction)
        out += self.cores.problems()
        out += self.workload.problems()
        out += self.energy.problems()
        out += self.metrics.problems()
        if self.alone_ipc and len(self.alone_ipc) != self.workload.cores:
            out.append("alone_ipc must list one IPC per core")
        if any(x <= 0 for x in self.alone_ipc):
            out.append("alone_ipc values must be positive")
        if self.seed < 0:
            out.append("seed must be a non-negative integer")
        ratio = self.cores.cpu_freq_mhz / self.timing.bus_freq_mhz
        if abs(ratio - self.cores.clock_ratio) > 1e-9:
            out.append(f"cores.clock_ratio ({self.cores.clock_ratio}) must equal "
                       f"cpu_freq_mhz / bus_freq_mhz ({ratio:g})")
        return out

    def validate(self) -> "RunConfig":
        errs = self.problems()
        if errs:
            raise ConfigError(errs)
        return self

    @property
    def cycles_per_ms(self) -> int:
        return int(round(self.cores.cpu_freq_mhz * 1000))

    def with_advisor(self, **changes) -> "RunConfig":
        return replace(self, advisor=replace(self.advisor, **changes))

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        """Build from the plain form; every bad key or value is reported at once."""
        kwargs = {}
        problems = []
        for f in fields(cls):
            if f.name not in data:
                continue
            val = data[f.name]
            sub = _SECTIONS.get(f.name)
            try:
                if sub is not None:
                    kwargs[f.name] = _build(sub, val, problems)
                elif f.name == "alone_ipc":
                    kwargs[f.name] = tuple(float(x) for x in val)
                else:
                    kwargs[f.name] = _coerce(val, 0, f.name)
            except ConfigError as exc:
                problems.extend(exc.problems)
            except (TypeError, ValueError, AttributeError):
                problems.append(f"{f.name}: cannot interpret {val!r}")
        unknown = sorted(set(data) - {f.name for f in fields(cls)})
        problems.extend(f"unknown key {k}" for k in unknown)
        if problems:
            raise ConfigError(problems)
        return cls(**kwargs)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["run"] = {"seed": str(self.seed),
                     "alone_ipc": ", ".join(repr(x) for x in self.alone_ipc)}
        for name in _SECTIONS:
            obj = getattr(self, name)
            cp[name] = {f.name: _ini_value(getattr(obj, f.name)) for f in fields(obj)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


_SECTIONS = {
    "geometry": DramGeometry,
    "timing": TimingParams,
    "reduction": ReductionTable,
    "controller": ControllerConfig,
    "advisor": AdvisorConfig,
    "cores": CoreConfig,
    "workload": WorkloadSpec,
    "energy": EnergyModel,
    "metrics": MetricsConfig,
}

# Tuple-valued keys and how each element is written in INI form.
_LIST_KEYS = {
    ("reduction", "rows"): 3,
    ("reduction", "baseline"): "float",
    ("advisor", "nuat_bins"): 2,
    ("metrics", "rltl_windows_ms"): "float",
    ("workload", "quotas"): "int",
    ("workload", "traces"): "str",
}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _tupleize(v):
    if isinstance(v, list):
        return tuple(_tupleize(x) for x in v)
    return v


def _build(cls, data: dict, problems: list):
    if not isinstance(data, dict):
        raise ConfigError(f"section {cls.__name__} must be a mapping")
    names = {f.name: f for f in fields(cls)}
    problems.extend(f"unknown key {cls.__name__}.{k}" for k in sorted(set(data) - set(names)))
    kwargs = {}
    for k, v in data.items():
        if k not in names:
            continue
        default = names[k].default
        if default is dataclasses.MISSING and names[k].default_factory is not dataclasses.MISSING:
            default = names[k].default_factory()
        try:
            kwargs[k] = _coerce(_tupleize(v), default, f"{cls.__name__}.{k}")
        except ConfigError as exc:
            problems.extend(exc.problems)
    return cls(**kwargs)


def _coerce(v, default, where):
    try:
        if isinstance(default, bool):
            if isinstance(v, str):
                low = v.strip().lower()
                if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                    raise ValueError(v)
                return low in ("true", "yes", "1", "on")
            return bool(v)
        if isinstance(default, int):
            if isinstance(v, float) and not v.is_integer():
                raise ValueError(v)
            return int(v)
        if isinstance(default, float):
            return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot interpret {v!r}") from None
    return v


def _ini_value(v) -> str:
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(":".join(_num(x) for x in row) for row in v)
        if v and isinstance(v[0], str):
            return "; ".join(v)
        return ", ".join(_num(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return _num(v)


def _num(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def _parse_list(section: str, key: str, text: str):
    kind = _LIST_KEYS[(section, key)]
    text = text.strip()
    if not text:
        return ()
    if kind == "str":
        return tuple(s.strip() for s in text.split(";") if s.strip())
    if kind in ("float", "int"):
        conv = float if kind == "float" else int
        return tuple(conv(_number(s)) for s in text.split(",") if s.strip())
    rows = []
    for chunk in text.split(";"):
        parts = [_number(p) for p in chunk.split(":")]
        if len(parts) != kind:
            raise ConfigError(f"{section}.{key}: each entry needs {kind} ':'-separated values")
        rows.append(tuple(float(p) for p in parts))
    return tuple(rows)


def _number(s: str):
    s = s.strip()
    try:
        return int(s)
    except ValueError:
        try:
            return float(s)
        except ValueError:
            raise ConfigError(f"not a number: {s!r}") from None


def parse_ini(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    data: dict = {}
    problems = []
    for section in cp.sections():
        if section == "run":
            for k, v in cp[section].items():
                if k == "seed":
                    data["seed"] = v
                elif k == "alone_ipc":
                    try:
                        data["alone_ipc"] = [float(x) for x in v.split(",") if x.strip()]
                    except ValueError:
                        problems.append(f"run.alone_ipc: not a number list: {v!r}")
                else:
                    problems.append(f"unknown key run.{k}")
            continue
        if section not in _SECTIONS:
            problems.append(f"unknown section [{section}]")
            continue
        sec = {}
        for k, v in cp[section].items():
            if (section, k) in _LIST_KEYS:
                try:
                    sec[k] = _parse_list(section, k, v)
                except ConfigError as exc:
                    problems.extend(exc.problems)
            else:
                sec[k] = v
        data[section] = sec
    try:
        cfg = RunConfig.from_dict(data)
    except ConfigError as exc:
        problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> RunConfig:
    """Load an INI config, or the JSON config echo embedded in a report."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if p.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        cfg = data.get("config", data)
        if not isinstance(cfg, dict):
            raise ConfigError(f"{path}: config echo must be a JSON object")
        return RunConfig.from_dict(cfg)
    return parse_ini(text)
