"""
Run traces.

One JSON object per line, keys in this order:

    time, rule, node, mode_before, mode_after, writes, safe, safer, inv_holds, fault

- rule: "env-input" | "time-progress" | "dm-step" | "node-step"
- mode_before / mode_after: DM steps only, otherwise null
- writes: topic -> value actually published (empty for a disabled node)
- safe / safer: {dm name: bool} membership of the plant state after the step
- inv_holds: {dm name: bool} on DM steps, evaluated with mode_after
- fault: null | "drop" | "delay" | "perturb" | "replace"

The digest of a trace is the SHA-256 of its JSON-lines bytes.
"""
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

import numpy as np

FIELDS = ("time", "rule", "node", "mode_before", "mode_after", "writes", "safe", "safer", "inv_holds", "fault")

ENV_INPUT = "env-input"
TIME_PROGRESS = "time-progress"
DM_STEP = "dm-step"
NODE_STEP = "node-step"


def jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, type(None), str)):
        return value
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "to_dict"):
        return jsonable(value.to_dict())
    return repr(value)


@dataclass
class TraceEvent:
    time: float
    rule: str
    node: Optional[str] = None
    mode_before: Optional[str] = None
    mode_after: Optional[str] = None
    writes: Dict[str, Any] = field(default_factory=dict)
    safe: Optional[Dict[str, bool]] = None
    safer: Optional[Dict[str, bool]] = None
    inv_holds: Optional[Dict[str, Optional[bool]]] = None
    fault: Optional[str] = None

    def to_dict(self) -> dict:
        return {name: jsonable(getattr(self, name)) for name in FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), allow_nan=True)

    @classmethod
    def from_dict(cls, data: dict) -> "TraceEvent":
        return cls(**{name: data.get(name) for name in FIELDS if name != "writes"}, writes=data.get("writes") or {})


class Trace:
    def __init__(self, events: Optional[List[TraceEvent]] = None, name: str = ""):
        self.events: List[TraceEvent] = list(events or [])
        self.name = name
        self.final = None
        self.choices = []
        self.schedule_id = None

    def __len__(self):
        return len(self.events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def append(self, event: TraceEvent) -> None:
        self.events.append(event)

    def of_rule(self, rule: str) -> List[TraceEvent]:
        return [e for e in self.events if e.rule == rule]

    def to_jsonl(self) -> bytes:
        return "".join(e.to_json() + "\n" for e in self.events).encode()

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl()).hexdigest()

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_jsonl())
        return path

    @classmethod
    def from_jsonl(cls, data: Union[bytes, str], name: str = "") -> "Trace":
        text = data.decode() if isinstance(data, bytes) else data
        return cls([TraceEvent.from_dict(json.loads(ln)) for ln in text.splitlines() if ln.strip()], name=name)

    @classmethod
    def read(cls, path: Union[str, Path]) -> "Trace":
        path = Path(path)
        return cls.from_jsonl(path.read_bytes(), name=path.stem)


def file_digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
