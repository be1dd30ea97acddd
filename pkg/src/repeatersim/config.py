"""JSON configuration files for chains, hardware, and RGS shapes.

A config file is a JSON object with up to four top-level sections::

    {
      "topology":    {... ChainTopology fields ...},
      "trapped_ion": {... TrappedIonParams fields ...},
      "ape":         {... ApeParams fields ...},
      "rgs":         {"m": 6, "b0": 6, "b1": 3}
    }

Every section is optional and falls back to defaults, but unknown keys are
rejected with the offending key path so typos never silently change a run.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .params import ApeParams, ChainTopology, RgsParams, TrappedIonParams

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "dump_config"]

_SECTIONS = {
    "topology": ChainTopology,
    "trapped_ion": TrappedIonParams,
    "ape": ApeParams,
    "rgs": RgsParams,
}

# topology needs these even when the section is omitted entirely
_TOPOLOGY_DEFAULTS = {"n_repeaters": 1, "chain_length_km": 50.0}


class ConfigError(ValueError):
    """Raised for malformed configuration, carrying the offending key path."""


@dataclass(frozen=True)
class RunConfig:
    topology: ChainTopology
    trapped_ion: TrappedIonParams
    ape: ApeParams
    rgs: RgsParams


def _build_section(name: str, cls, data: dict[str, Any], defaults: dict[str, Any] | None = None):
    if not isinstance(data, dict):
        raise ConfigError(f"config section '{name}' must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key '{name}.{key}'")
    merged = dict(defaults or {})
    merged.update(data)
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config section '{name}': {exc}") from exc


def parse_config(raw: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from a parsed JSON object, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for key in raw:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown config key '{key}'")
    topology = _build_section(
        "topology", ChainTopology, raw.get("topology", {}), _TOPOLOGY_DEFAULTS
    )
    trapped_ion = _build_section("trapped_ion", TrappedIonParams, raw.get("trapped_ion", {}))
    ape = _build_section("ape", ApeParams, raw.get("ape", {}))
    rgs = _build_section("rgs", RgsParams, raw.get("rgs", {"m": 6, "b0": 6, "b1": 3}))
    return RunConfig(topology=topology, trapped_ion=trapped_ion, ape=ape, rgs=rgs)


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a JSON config file."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)


def dump_config(config: RunConfig) -> dict[str, Any]:
    """Serialize a RunConfig back to a plain JSON-compatible dict.

    parse_config(dump_config(c)) reconstructs an equal RunConfig.
    """
    return {
        "topology": dataclasses.asdict(config.topology),
        "trapped_ion": dataclasses.asdict(config.trapped_ion),
        "ape": dataclasses.asdict(config.ape),
        "rgs": dataclasses.asdict(config.rgs),
    }
