"""Run configuration: flat ``key = value`` text or a JSON object."""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, replace
from typing import Any, Optional

from .grids import LogGrid, UGrid
from .maxsq import TGrid
from .multipliers import parse_multiplier


class ConfigError(ValueError):
    """Invalid configuration; carries the offending key or text position."""

    def __init__(self, message: str, key: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        where = []
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{'; '.join(where)}: {message}" if where else message)
        self.key, self.line, self.column = key, line, column


@dataclass(frozen=True)
class RunConfig:
    alpha: int
    multiplier: str = "sheat"
    model: str = "cycle:16"
    p_values: tuple = (2.0, 4.0)
    seed: int = 20240601
    output_dir: str = "out"
    s_min: float = 1e-8
    s_max: float = 1e8
    points_per_decade: int = 256
    u_max: float = 2048.0
    du: float = 1.0 / 64.0
    j_min: int = -40
    j_max: int = 40
    q: int = 8
    n_signals: int = 100
    n_rademacher: int = 64

    @property
    def sgrid(self) -> LogGrid:
        return LogGrid(self.s_min, self.s_max, self.points_per_decade)

    @property
    def ugrid(self) -> UGrid:
        return UGrid(self.u_max, self.du)

    @property
    def tgrid(self) -> TGrid:
        return TGrid(self.j_min, self.j_max, self.q)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["p_values"] = list(self.p_values)
        return d

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return validate(replace(self, **kw).as_dict()) if kw else self


KEYS = {f for f in RunConfig.__dataclass_fields__}
INT_KEYS = {"alpha", "seed", "points_per_decade", "j_min", "j_max", "q", "n_signals",
            "n_rademacher"}
FLOAT_KEYS = {"s_min", "s_max", "u_max", "du"}


def _to_int(key, v):
    if isinstance(v, bool):
        raise ConfigError(f"expected an integer, got {v!r}", key=key)
    if isinstance(v, float) and v.is_integer():
        return int(v)
    if isinstance(v, int):
        return v
    try:
        return int(str(v), 0)
    except ValueError:
        raise ConfigError(f"expected an integer, got {v!r}", key=key) from None


def _to_float(key, v):
    if isinstance(v, bool):
        raise ConfigError(f"expected a number, got {v!r}", key=key)
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {v!r}", key=key) from None
    if not math.isfinite(x):
        raise ConfigError(f"expected a finite number, got {v!r}", key=key)
    return x


def _to_list(key, v):
    if isinstance(v, (list, tuple)):
        return [_to_float(key, x) for x in v]
    text = str(v).strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ConfigError(f"expected a list like [2, 4], got {v!r}", key=key)
    body = text[1:-1].strip()
    return [_to_float(key, x) for x in body.split(",")] if body else []


def validate(raw: dict) -> RunConfig:
    unknown = sorted(set(raw) - KEYS)
    if unknown:
        raise ConfigError(f"unknown key (allowed: {', '.join(sorted(KEYS))})", key=unknown[0])
    if "alpha" not in raw:
        raise ConfigError("required key is missing", key="alpha")
    vals: dict[str, Any] = {}
    for key, v in raw.items():
        if key in INT_KEYS:
            vals[key] = _to_int(key, v)
        elif key in FLOAT_KEYS:
            vals[key] = _to_float(key, v)
        elif key == "p_values":
            vals[key] = tuple(_to_list(key, v))
        else:
            vals[key] = str(v).strip()
    cfg = RunConfig(**vals)
    if cfg.alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {cfg.alpha}", key="alpha")
    if not cfg.p_values:
        raise ConfigError("at least one p is needed", key="p_values")
    for p in cfg.p_values:
        if not 1.0 < p < math.inf:
            raise ConfigError(f"every p must satisfy 1 < p < inf, got {p:g}", key="p_values")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer", key="seed")
    try:
        parse_multiplier(cfg.multiplier)
    except ValueError as exc:
        raise ConfigError(str(exc), key="multiplier") from None
    kind, _, arg = cfg.model.partition(":")
    if kind == "cycle":
        if not arg.isdigit() or int(arg) < 3:
            raise ConfigError(f"cycle model needs an integer n >= 3, got {cfg.model!r}",
                              key="model")
    elif kind != "diagonal" or not arg:
        raise ConfigError(f"model must be cycle:n or diagonal:file, got {cfg.model!r}",
                          key="model")
    for key, build in (("s_min", lambda: cfg.sgrid), ("u_max", lambda: cfg.ugrid),
                       ("j_min", lambda: cfg.tgrid)):
        try:
            build()
        except ValueError as exc:
            raise ConfigError(str(exc), key=key) from None
    if cfg.n_signals < 100:
        raise ConfigError("ensembles need at least 100 signals", key="n_signals")
    if cfg.n_rademacher < 32:
        raise ConfigError("at least 32 Rademacher draws are needed", key="n_rademacher")
    return cfg


# entries on one line may be separated by commas: a comma starts a new
# entry only when a ``key =`` follows, so list values and family
# parameters keep their commas
_ENTRY = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*=")


def _split_entries(line: str, lineno: int) -> list[tuple[str, str, int]]:
    out = []
    depth = 0
    starts = [0]
    for i, ch in enumerate(line):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0 and _ENTRY.match(line, i + 1):
            starts.append(i + 1)
    starts.append(len(line) + 1)
    for a, b in zip(starts[:-1], starts[1:]):
        chunk = line[a:b - 1]
        m = _ENTRY.match(chunk)
        if not m:
            col = a + len(chunk) - len(chunk.lstrip()) + 1
            raise ConfigError(f"expected 'key = value', got {chunk.strip()!r}",
                              line=lineno, column=col)
        value = chunk[m.end():].strip()
        if not value:
            raise ConfigError("missing value", key=m.group(1), line=lineno,
                              column=a + m.end() + 1)
        out.append((m.group(1), value, a + m.start(1) + 1))
    return out


def _parse_keyvalue(text: str) -> dict:
    raw: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        for key, value, col in _split_entries(body, lineno):
            if key in raw:
                raise ConfigError("duplicate key", key=key, line=lineno, column=col)
            if key not in KEYS:
                raise ConfigError("unknown key", key=key, line=lineno, column=col)
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            raw[key] = value
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno, column=exc.colno) from None
        if not isinstance(raw, dict):
            raise ConfigError("JSON config must be an object")
    else:
        raw = _parse_keyvalue(text)
    return validate(raw)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())
