"""Run configuration: JSON parsing, validation and serialization."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .controls import ControlSchedule, schedule_from_dict
from .experiments import SCENARIOS, Axis
from .lindblad import HamiltonianSpec, NoiseChannel
from .optimize import PowellConfig
from .policy import TrainConfig
from .protocols import resolve_protocol

__all__ = ["ConfigError", "RunConfig", "load_config", "load_schedule"]


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_nonneg = {"type": "number", "minimum": 0}

_train_props = {f.name: {} for f in dataclasses.fields(TrainConfig)}
_train_props.update({
    "n_batch": {"type": "integer", "minimum": 1},
    "n_epochs": {"type": "integer", "minimum": 0},
    "n_steps": {"type": "integer", "minimum": 1},
    "T": {"type": "number", "exclusiveMinimum": 0},
    "ranges": _pair,
    "sigma": _pair,
    "sink_rate": {"type": ["number", "null"], "minimum": 0},
    "seed": {"type": "integer"},
    "init_scheme": {"enum": ["uniform", "glorot"]},
})

_powell_props = {f.name: {} for f in dataclasses.fields(PowellConfig)}
_powell_props.update({
    "init_range": {"type": ["array", "null"], "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    "restarts": {"type": "integer", "minimum": 1},
    "max_iter": {"type": "integer", "minimum": 1},
    "seed": {"type": "integer"},
})

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "sink": {"type": "boolean"},
                "sink_rate": {"type": ["number", "null"], "minimum": 0},
                "omega_p": {"type": "number", "exclusiveMinimum": 0},
                "omega_s": {"type": "number", "exclusiveMinimum": 0},
                "n_samples": {"type": "integer", "minimum": 2},
                "channels": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind", "rate"],
                        "properties": {
                            "kind": {"enum": ["decay_eg", "decay_fe", "dephase"]},
                            "rate": _nonneg,
                            "level": {"enum": ["g", "e", "f"]},
                        },
                    },
                },
            },
        },
        "protocol": {"type": ["string", "object", "null"]},
        "train": {"type": "object", "additionalProperties": False, "properties": _train_props},
        "optimize": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["ansatz1", "parity_polys", "polynomial"]},
                "order": {"type": "integer", "minimum": 0},
                "n_runs": {"type": "integer", "minimum": 1},
                "sink": {"type": "boolean"},
                "powell": {"type": "object", "additionalProperties": False, "properties": _powell_props},
            },
        },
        "sweep": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["scenario"],
            "properties": {
                "scenario": {"enum": list(SCENARIOS)},
                "level": {"enum": ["g", "e", "f"]},
                "include_sink": {"type": ["boolean", "null"]},
                "n_samples": {"type": "integer", "minimum": 2},
                "axes": {
                    "type": ["array", "null"],
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name", "min", "max", "n_points"],
                        "properties": {
                            "name": {"type": "string"},
                            "min": {"type": "number"},
                            "max": {"type": "number"},
                            "n_points": {"type": "integer", "minimum": 1},
                            "spacing": {"enum": ["linear", "log"]},
                        },
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": ["string", "null"]}, "checkpoint": {"type": ["string", "null"]}},
        },
    },
}


@dataclass
class SystemConfig:
    T: float = 40.0
    sink: bool = False
    sink_rate: float | None = None
    omega_p: float = 1.0
    omega_s: float = 1.0
    n_samples: int = 401
    channels: list[NoiseChannel] = field(default_factory=list)

    @property
    def hamiltonian(self) -> HamiltonianSpec:
        return HamiltonianSpec(self.omega_p, self.omega_s)

    @property
    def effective_sink_rate(self) -> float:
        return 10.0 / self.T if self.sink_rate is None else self.sink_rate

    def all_channels(self) -> list[NoiseChannel]:
        sink = [NoiseChannel.sink(self.effective_sink_rate)] if self.sink else []
        return sink + list(self.channels)

    @property
    def dim(self) -> int:
        return 4 if self.sink else 3

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["channels"] = [c.to_dict() for c in self.channels]
        return d


@dataclass
class OptimizeConfig:
    family: str = "ansatz1"
    order: int = 5
    n_runs: int = 10
    sink: bool = False
    powell: PowellConfig = field(default_factory=PowellConfig)

    def to_dict(self) -> dict:
        p = dataclasses.asdict(self.powell)
        if p["init_range"] is not None:
            p["init_range"] = list(p["init_range"])
        return {"family": self.family, "order": self.order, "n_runs": self.n_runs,
                "sink": self.sink, "powell": p}


@dataclass
class SweepConfig:
    scenario: str
    level: str | None = None
    include_sink: bool | None = None
    n_samples: int = 401
    axes: list[Axis] | None = None

    def to_dict(self) -> dict:
        d = {"scenario": self.scenario, "include_sink": self.include_sink, "n_samples": self.n_samples,
             "axes": None if self.axes is None else [a.to_dict() for a in self.axes]}
        if self.level is not None:
            d["level"] = self.level
        return d


@dataclass
class RunConfig:
    """Everything a CLI run needs. ``protocol`` is a built-in name or a schedule."""

    system: SystemConfig = field(default_factory=SystemConfig)
    protocol: str | ControlSchedule | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    sweep: SweepConfig | None = None
    output: dict = field(default_factory=lambda: {"path": None, "checkpoint": None})
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config error at {loc}: {exc.message}") from None
        try:
            sysd = dict(data.get("system", {}))
            channels = [NoiseChannel.from_dict(c) for c in sysd.pop("channels", [])]
            system = SystemConfig(**sysd, channels=channels)
            proto = data.get("protocol")
            if isinstance(proto, dict):
                proto = schedule_from_dict(proto)
            elif isinstance(proto, str):
                resolve_protocol(proto)
            train = TrainConfig(**data.get("train", {}))
            optd = dict(data.get("optimize", {}))
            powd = dict(optd.pop("powell", {}))
            if powd.get("init_range") is not None:
                powd["init_range"] = tuple(powd["init_range"])
            optimize = OptimizeConfig(**optd, powell=PowellConfig(**powd))
            sweep = None
            if data.get("sweep") is not None:
                swd = dict(data["sweep"])
                axes = swd.pop("axes", None)
                sweep = SweepConfig(**swd, axes=None if axes is None else [Axis(**a) for a in axes])
            output = {"path": None, "checkpoint": None, **data.get("output", {})}
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        return cls(system, proto, train, optimize, sweep, output, data.get("seed", 0))

    def to_dict(self) -> dict:
        proto = self.protocol.to_dict() if isinstance(self.protocol, ControlSchedule) else self.protocol
        return {
            "seed": self.seed,
            "system": self.system.to_dict(),
            "protocol": proto,
            "train": self.train.to_dict(),
            "optimize": self.optimize.to_dict(),
            "sweep": None if self.sweep is None else self.sweep.to_dict(),
            "output": dict(self.output),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return RunConfig.from_dict(data)


def load_schedule(path) -> ControlSchedule:
    """Read a schedule JSON file, or the ``schedule`` entry of a result file."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read schedule {path}: {exc}") from None
    if "schedule" in data:
        data = data["schedule"]
    try:
        return schedule_from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
