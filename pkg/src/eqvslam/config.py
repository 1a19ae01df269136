"""YAML run configuration with line-numbered diagnostics.

A file has up to four top-level sections plus an optional preset::

    preset: standard
    scenario: {duration: 60, seed: 0, noise: 0.0, ...}
    observer: {k: 5, alpha: 500, integrator: rk4, ...}
    replay:   {min_sightings: 2, max_missed: 1, with_scale: true}
    sweep:    {k: [1, 5, 25], samples: 200, ...}

Every key is optional; unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .observer import ObserverConfig
from .simulation import ScenarioConfig, VelocitySegment, scenario_standard
from .sweep import SweepSpec

PRESETS = {"standard": scenario_standard}


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {msg}")


@dataclass(frozen=True)
class ReplayOptions:
    """Landmark lifecycle during replay.

    A landmark joins the observer once it has been seen in ``min_sightings``
    consecutive records and leaves after missing more than ``max_missed``
    consecutive records.
    """

    min_sightings: int = 2
    max_missed: int = 1
    with_scale: bool = True

    def __post_init__(self):
        if self.min_sightings < 1 or self.max_missed < 0:
            raise ValueError("min_sightings must be >= 1 and max_missed >= 0")


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    replay: ReplayOptions = field(default_factory=ReplayOptions)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    @property
    def observer(self) -> ObserverConfig:
        return self.scenario.observer

    def with_observer(self, **changes) -> RunConfig:
        obs = replace(self.scenario.observer, **changes)
        return replace(self, scenario=replace(self.scenario, observer=obs))


def _key_lines(node, path=()):
    """Map every key path in a composed YAML tree to its 1-based line."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            sub = path + (key.value,)
            out[sub] = key.start_mark.line + 1
            out.update(_key_lines(value, sub))
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            sub = path + (i,)
            out[sub] = item.start_mark.line + 1
            out.update(_key_lines(item, sub))
    return out


def _coerce(name, value, default):
    if isinstance(default, tuple) and name != "segments":
        if isinstance(value, (int, float)) and not isinstance(value, bool) and name in ("k", "alpha"):
            return (float(value),)
        if not isinstance(value, list):
            raise TypeError(f"expected a list, got {value!r}")
        return tuple(float(x) for x in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError(f"expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not float(value).is_integer():
            raise TypeError(f"expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool):
            raise TypeError(f"expected a number, got {value!r}")
        return float(value)
    return value


def _build(cls, section: dict, base, path, lines, source):
    """``replace(base, **section)`` with per-key type coercion and error lines."""
    if section is None:
        return base
    if not isinstance(section, dict):
        raise ConfigError(f"section '{path[-1]}' must be a mapping", lines.get(path), source)
    known = {f.name for f in fields(cls)}
    changes = {}
    for key, value in section.items():
        line = lines.get(path + (key,))
        if key not in known:
            raise ConfigError(f"unknown key '{key}' in section '{path[-1]}'", line, source)
        try:
            changes[key] = _coerce(key, value, getattr(base, key))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for '{key}': {exc}", line, source) from None
    try:
        return replace(base, **changes)
    except (TypeError, ValueError) as exc:
        words = set(re.findall(r"\w+", str(exc)))
        culprit = next((k for k in changes if k in words), None)
        line = lines.get(path + (culprit,)) if culprit else lines.get(path)
        raise ConfigError(str(exc), line, source) from None


def _segments(raw, lines, source):
    if not isinstance(raw, list):
        raise ConfigError("segments must be a list", lines.get(("scenario", "segments")), source)
    out = []
    for i, item in enumerate(raw):
        line = lines.get(("scenario", "segments", i))
        try:
            out.append(VelocitySegment(float(item["t_start"]), tuple(map(float, item["omega"])),
                                       tuple(map(float, item["v"]))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"segment {i} needs t_start, omega and v ({exc})", line, source) from None
    return tuple(out)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    lines = _key_lines(node) if node is not None else {}
    allowed = {"preset", "scenario", "observer", "replay", "sweep"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown section '{key}'", lines.get((key,)), source)

    scenario = ScenarioConfig()
    if "preset" in data:
        name = data["preset"]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}",
                              lines.get(("preset",)), source)
        scenario = PRESETS[name]()

    obs = _build(ObserverConfig, data.get("observer"), scenario.observer, ("observer",), lines, source)
    if data.get("scenario") is not None and not isinstance(data["scenario"], dict):
        raise ConfigError("section 'scenario' must be a mapping", lines.get(("scenario",)), source)
    raw_sc = dict(data.get("scenario") or {})
    if "observer" in raw_sc:
        raise ConfigError("observer settings belong in the top-level 'observer' section",
                          lines.get(("scenario", "observer")), source)
    if "segments" in raw_sc:
        raw_sc["segments"] = _segments(raw_sc["segments"], lines, source)
    if raw_sc.get("landmarks") is not None:
        try:
            raw_sc["landmarks"] = tuple(tuple(float(c) for c in p) for p in raw_sc["landmarks"])
            if any(len(p) != 3 for p in raw_sc["landmarks"]):
                raise ValueError("each landmark needs three coordinates")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad landmarks: {exc}", lines.get(("scenario", "landmarks")), source) from None
    scenario = _build(ScenarioConfig, raw_sc, replace(scenario, observer=obs), ("scenario",), lines, source)
    replay = _build(ReplayOptions, data.get("replay"), ReplayOptions(), ("replay",), lines, source)
    sweep = _build(SweepSpec, data.get("sweep"), SweepSpec(), ("sweep",), lines, source)
    return RunConfig(scenario, replay, sweep)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain-data view of a configuration, suitable for JSON summaries."""
    return {
        "scenario": {k: v for k, v in dataclasses.asdict(cfg.scenario).items() if k != "observer"},
        "observer": dataclasses.asdict(cfg.observer),
        "replay": dataclasses.asdict(cfg.replay),
        "sweep": dataclasses.asdict(cfg.sweep),
    }
