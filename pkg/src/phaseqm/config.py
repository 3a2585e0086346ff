"""Declarative run configuration (JSON) and its validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import DomainError
from .numerics import MIN_COUNT

SCHEMA_VERSION = 1
TASKS = ("quantize", "uncertainty", "commutators", "fundamental-residual", "fluctuation", "all")
FORMATS = ("json", "csv")
GENERATORS = ("gaussian", "free_particle", "random")

# per-task section name; a section may override the top-level grid, state and hamiltonian
SECTIONS = {
    "quantize": "quantize",
    "uncertainty": "uncertainty",
    "commutators": "commutators",
    "fundamental-residual": "fundamental",
    "fluctuation": "fluctuation",
}
# inputs each task needs, from its section or the top level
REQUIRED = {
    "quantize": ("hamiltonian",),
    "uncertainty": ("grid", "state"),
    "commutators": ("grid", "state"),
    "fundamental-residual": ("grid", "state"),
    "fluctuation": ("fluctuation",),
}


class ConfigError(DomainError):
    """Configuration cannot be parsed or fails validation."""


@dataclass
class RunConfig:
    task: str
    hbar: float = 1.0
    hamiltonian: Optional[dict] = None
    grid: Optional[dict] = None
    state: Optional[dict] = None
    tolerances: Dict[str, float] = field(default_factory=dict)
    output: Dict[str, Any] = field(default_factory=dict)
    sections: Dict[str, dict] = field(default_factory=dict)
    raw: Dict[str, Any] = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def lookup(self, task: str, key: str):
        """``key`` from the task's section, falling back to the top level."""
        sec = self.section(SECTIONS[task])
        return sec[key] if key in sec else getattr(self, key)


def _validate_grid(grid: dict) -> None:
    if not isinstance(grid, dict):
        raise ConfigError("grid must be an object")
    for ax in ("axis_a", "axis_b"):
        spec = grid.get(ax)
        if not isinstance(spec, dict):
            raise ConfigError(f"grid.{ax} must be an object with lower, upper, count")
        missing = [k for k in ("lower", "upper", "count") if k not in spec]
        if missing:
            raise ConfigError(f"grid.{ax} is missing {', '.join(missing)}")
        count = spec["count"]
        if not isinstance(count, int) or count < MIN_COUNT:
            raise ConfigError(f"grid.{ax}.count must be an integer >= {MIN_COUNT} (got {count!r})")
        if not spec["lower"] < spec["upper"]:
            raise ConfigError(f"grid.{ax} requires lower < upper")


def parse_config(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    task = data.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)} (got {task!r})")
    hbar = data.get("hbar", 1.0)
    if not isinstance(hbar, (int, float)) or not hbar > 0:
        raise ConfigError("hbar must be a positive number")
    for t in SECTIONS if task == "all" else (task,):
        sec = data.get(SECTIONS[t], {})
        if not isinstance(sec, dict):
            raise ConfigError(f"section {SECTIONS[t]!r} must be an object")
        for key in REQUIRED[t]:
            if key not in sec and key not in data:
                raise ConfigError(f"task {t!r} requires {key!r} (top level or in section {SECTIONS[t]!r})")
    for where in [data] + [data.get(name, {}) for name in SECTIONS.values()]:
        if "grid" in where:
            _validate_grid(where["grid"])
        state = where.get("state")
        if state is not None and (not isinstance(state, dict) or state.get("generator") not in GENERATORS):
            raise ConfigError(f"state.generator must be one of {', '.join(GENERATORS)}")
    output = dict(data.get("output", {}))
    fmt = output.get("format", "json")
    if fmt not in FORMATS:
        raise ConfigError(f"output.format must be json or csv (got {fmt!r})")
    output["format"] = fmt
    sections = {k: v for k, v in data.items() if k in SECTIONS.values()}
    return RunConfig(
        task=task,
        hbar=float(hbar),
        hamiltonian=data.get("hamiltonian"),
        grid=data.get("grid"),
        state=data.get("state"),
        tolerances=dict(data.get("tolerances", {})),
        output=output,
        sections=sections,
        raw=data,
    )


def load_config(path) -> RunConfig:
    """Read and validate a config file.

    Raises:
        ConfigError: unreadable file, malformed JSON (with line/column), or
            a failed validation rule.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data)
