"""Run configuration: a flat key-path text format and its resolved form.

Config files are plain text, one ``block.key = value`` per line, values in
JSON syntax (bare words are taken as strings).  Experiments stay diffable
artifacts; nothing is read from the environment except an output directory
override on the command line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List

from .density import (
    DEFAULT_NODES_R,
    DEFAULT_NODES_X,
    DEFAULT_NODES_Y,
    DEFAULT_TRUNC_SD,
    QuadratureSpec,
)
from .errors import ConfigError
from .grids import DEFAULT_A_POINTS, SolverGrid, make_grid
from .model import RegimeModel, validate_model

_DEFAULTS: Dict[str, Any] = {
    "model.mu": [0.2],
    "model.sigma": [0.5],
    "model.q": [[0.0]],
    "model.T": 1.0,
    "grid.n": 50,
    "grid.a_points": DEFAULT_A_POINTS,
    "grid.a_max": "auto",
    "grid.spacing": "log",
    "quadrature.nodes_x": DEFAULT_NODES_X,
    "quadrature.nodes_y": DEFAULT_NODES_Y,
    "quadrature.nodes_r": DEFAULT_NODES_R,
    "quadrature.trunc_sd": DEFAULT_TRUNC_SD,
    "mc.paths": 100_000,
    "mc.substeps": 8,
    "mc.seed": 20240809,
    "tolerance.tol_abs": 1e-4,
    "tolerance.tol_rel": 1e-4,
    "output.directory": "out",
    "output.precision": 15,
}


@dataclass
class RunConfig:
    """Fully resolved configuration plus the list of defaulted keys."""

    entries: Dict[str, Any]
    defaults_applied: List[str] = field(default_factory=list)

    def __getitem__(self, key: str) -> Any:
        return self.entries[key]

    def model(self) -> RegimeModel:
        return validate_model(
            RegimeModel(
                mu=self.entries["model.mu"],
                sigma=self.entries["model.sigma"],
                generator=self.entries["model.q"],
                horizon=self.entries["model.T"],
            )
        )

    def grid(self, model: RegimeModel) -> SolverGrid:
        a_max = self.entries["grid.a_max"]
        if self.entries["grid.spacing"] != "log":
            raise ConfigError(
                f"grid.spacing must be 'log', got {self.entries['grid.spacing']!r}"
            )
        return make_grid(
            model,
            n=int(self.entries["grid.n"]),
            a_points=int(self.entries["grid.a_points"]),
            a_max=None if a_max == "auto" else float(a_max),
        )

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(
            nodes_y=int(self.entries["quadrature.nodes_y"]),
            nodes_x=int(self.entries["quadrature.nodes_x"]),
            nodes_r=int(self.entries["quadrature.nodes_r"]),
            trunc_sd=float(self.entries["quadrature.trunc_sd"]),
        )

    def canonical_json(self) -> str:
        return json.dumps(self.entries, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse the flat key-path format, reporting line and field context."""
    entries: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            entries[key] = json.loads(value)
        except json.JSONDecodeError:
            entries[key] = value
    defaults_applied = []
    for key, default in _DEFAULTS.items():
        if key not in entries:
            entries[key] = default
            defaults_applied.append(key)
    return RunConfig(entries=entries, defaults_applied=sorted(defaults_applied))


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=path)
