"""
Scenario files: dotenv-style KEY=value lines.

    NAME=car-theorem
    PLANT=mountain-car
    RESOLUTION=100,100
    SCHEDULE=exhaustive
    BOUND=2
    DEPTH=2
    CAP=1000
    FALLBACK=random
    HORIZON=1000
    FAULT=dm-drop

Relative PROGRAM paths resolve against the scenario file first, then the
plant programs directory. A scenario without PLANT and PROGRAM is empty:
no topics, no nodes.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from django.conf import settings
from dotenv import dotenv_values

from plants.battery import PRESETS
from plants.common import Deployment
from plants.registry import PLANTS, PROGRAMS_DIR
from testharness.faults import FaultProfile
from testharness.policies import ExplorationError, ScheduleKind, SchedulePolicy

from .errors import DslError

logger = logging.getLogger(__name__)

KEYS = (
    "NAME", "PROGRAM", "PLANT", "RESOLUTION", "DELTA", "HORIZON",
    "SCHEDULE", "BOUND", "DEPTH", "CAP", "FALLBACK", "SEED", "SEEDS",
    "FAULT", "FAULT_RATE", "FAULT_MAGNITUDE", "FAULT_TARGETS",
    "EPSILON", "X_CLIFF", "BATTERY_PRESET", "MODE", "MUTANT",
    "INITIAL_STATE", "ALLOW_UNVERIFIED", "OUT",
)


def _setting(name: str, default):
    return getattr(settings, name, default)


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.replace("(", "").replace(")", "").split(",") if v.strip())


def _flag(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    program: Optional[Path] = None
    plant: Optional[str] = None
    resolution: Optional[Tuple[int, ...]] = None
    delta: Optional[float] = None
    horizon: Optional[float] = None
    schedule: ScheduleKind = ScheduleKind.DEFAULT
    bound: int = 0
    depth: Optional[int] = None
    cap: Optional[int] = None
    fallback: str = "error"
    seed: int = 0
    seeds: int = 1
    fault: str = "none"
    fault_rate: float = 1.0
    fault_magnitude: Optional[float] = None
    fault_targets: Tuple[str, ...] = ()
    epsilon: Optional[float] = None
    x_cliff: Optional[float] = None
    battery_preset: str = "default"
    mode: Deployment = Deployment.RTA
    mutant: Optional[str] = None
    initial_state: Optional[Tuple[float, ...]] = None
    allow_unverified: bool = False
    out: Optional[Path] = None
    source: Optional[Path] = field(default=None, repr=False)

    @property
    def empty(self) -> bool:
        return self.plant is None and self.program is None

    def program_path(self) -> Optional[Path]:
        if self.program is None:
            return PLANTS[self.plant].program_path if self.plant else None
        if self.program.is_absolute():
            return self.program
        if self.source is not None and (self.source.parent / self.program).exists():
            return self.source.parent / self.program
        return PROGRAMS_DIR / self.program

    def output_dir(self) -> Path:
        base = self.out or Path(_setting("RTA_OUTPUT_DIR", "runs"))
        return Path(base) / self.name

    def plant_params(self) -> Dict[str, Any]:
        return {
            "resolution": self.resolution or _setting("RTA_GRID_RESOLUTION", (100, 100)),
            "delta": self.delta,
            "x_cliff": self.x_cliff,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "preset": self.battery_preset,
            "initial": self.initial_state,
            "mutant": self.mutant,
        }

    def policy(self, **overrides) -> SchedulePolicy:
        values = {
            "kind": self.schedule,
            "bound": self.bound,
            "seed": self.seed,
            "seeds": self.seeds,
            "depth": self.depth,
            "cap": self.cap or int(_setting("RTA_EXPLORE_CAP", 1000)),
            "fallback": self.fallback,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return SchedulePolicy(**values)

    def fault_profile(self) -> FaultProfile:
        return FaultProfile(
            kind=self.fault,
            targets=self.fault_targets,
            rate=self.fault_rate,
            magnitude=self.fault_magnitude,
            seed=self.seed,
        )

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], source: Optional[Path] = None) -> "ScenarioConfig":
        raw = {str(k).upper(): ("" if v is None else str(v)).strip() for k, v in values.items()}
        unknown = sorted(set(raw) - set(KEYS))
        if unknown:
            raise DslError("unknown_scenario_key", f"unknown scenario keys: {', '.join(unknown)}")
        get = lambda key: raw.get(key) or None  # noqa: E731

        try:
            config = cls(source=source)
            if get("NAME"):
                config.name = get("NAME")
            elif source is not None:
                config.name = source.stem
            config.program = Path(get("PROGRAM")) if get("PROGRAM") else None
            config.plant = get("PLANT")
            if get("RESOLUTION"):
                config.resolution = tuple(int(v) for v in get("RESOLUTION").split(","))
            config.delta = float(get("DELTA")) if get("DELTA") else None
            config.horizon = float(get("HORIZON")) if get("HORIZON") else None
            if get("SCHEDULE"):
                config.schedule = ScheduleKind.parse(get("SCHEDULE"))
            config.bound = int(get("BOUND") or 0)
            config.depth = int(get("DEPTH")) if get("DEPTH") else None
            config.cap = int(get("CAP")) if get("CAP") else None
            config.fallback = (get("FALLBACK") or "error").lower()
            config.seed = int(get("SEED") or 0)
            config.seeds = int(get("SEEDS") or 1)
            config.fault = get("FAULT") or "none"
            config.fault_rate = float(get("FAULT_RATE") or 1.0)
            config.fault_magnitude = float(get("FAULT_MAGNITUDE")) if get("FAULT_MAGNITUDE") else None
            config.fault_targets = tuple(t.strip() for t in (get("FAULT_TARGETS") or "").split(",") if t.strip())
            config.epsilon = float(get("EPSILON")) if get("EPSILON") else None
            config.x_cliff = float(get("X_CLIFF")) if get("X_CLIFF") else None
            config.battery_preset = get("BATTERY_PRESET") or "default"
            config.mode = Deployment(get("MODE") or Deployment.RTA.value)
            config.mutant = get("MUTANT")
            config.initial_state = _floats(get("INITIAL_STATE")) if get("INITIAL_STATE") else None
            config.allow_unverified = _flag(get("ALLOW_UNVERIFIED") or "")
            config.out = Path(get("OUT")) if get("OUT") else None
        except (ValueError, ExplorationError) as exc:
            raise DslError("bad_scenario_value", str(exc)) from None

        config.validate()
        return config

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioConfig":
        path = Path(path)
        if not path.exists():
            raise DslError("scenario_not_found", str(path))
        return cls.from_mapping(dotenv_values(path), source=path)

    def validate(self) -> None:
        if self.plant is not None and self.plant not in PLANTS:
            raise DslError("unknown_plant", f"plant {self.plant!r} is not one of {', '.join(sorted(PLANTS))}")
        if self.battery_preset not in PRESETS:
            raise DslError("unknown_preset", f"battery preset {self.battery_preset!r} is not one of {', '.join(sorted(PRESETS))}")
        if self.program is not None and not self.program_path().exists():
            raise DslError("program_not_found", str(self.program_path()))
        if self.bound < 0 or self.seeds < 1:
            raise DslError("bad_scenario_value", "BOUND must be >= 0 and SEEDS >= 1")
        if self.fallback not in ("error", "random"):
            raise DslError("bad_scenario_value", f"FALLBACK {self.fallback!r} is not error or random")
        if (self.depth is not None and self.depth < 0) or (self.cap is not None and self.cap < 1):
            raise DslError("bad_scenario_value", "DEPTH must be >= 0 and CAP >= 1")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "plant": self.plant,
            "program": str(self.program_path()) if not self.empty else None,
            "mode": self.mode.value,
            "schedule": self.schedule.value,
            "bound": self.bound,
            "fallback": self.fallback,
            "seed": self.seed,
            "fault": self.fault,
        }
