from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np


class Status(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_CHECKABLE = "not-checkable"


@dataclass(frozen=True)
class Verdict:
    condition: str
    status: Status
    witness: Any = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status != Status.FAIL

    def to_dict(self) -> dict:
        witness = self.witness
        if isinstance(witness, np.ndarray):
            witness = witness.tolist()
        return {"condition": self.condition, "status": self.status.value, "witness": witness, "detail": self.detail}


def passed(condition, detail=""):
    return Verdict(condition, Status.PASS, detail=detail)


def failed(condition, witness, detail=""):
    return Verdict(condition, Status.FAIL, witness=witness, detail=detail)


def unchecked(condition, detail):
    return Verdict(condition, Status.NOT_CHECKABLE, detail=detail)


@dataclass
class WellformednessReport:
    module: str
    verdicts: Dict[str, Verdict] = field(default_factory=dict)
    resolution: Optional[tuple] = None

    def add(self, verdict: Verdict) -> None:
        self.verdicts[verdict.condition] = verdict

    @property
    def overall(self) -> bool:
        """No checkable condition failed."""
        return all(v.ok for v in self.verdicts.values())

    @property
    def verified(self) -> bool:
        """Every condition was checked and passed."""
        return all(v.status == Status.PASS for v in self.verdicts.values())

    def failures(self):
        return [v for v in self.verdicts.values() if v.status == Status.FAIL]

    def to_dict(self) -> dict:
        return {
            "module": self.module,
            "overall": self.overall,
            "verified": self.verified,
            "resolution": list(self.resolution) if self.resolution else None,
            "verdicts": [v.to_dict() for v in self.verdicts.values()],
        }

    def render(self) -> str:
        lines = [f"module {self.module}"]
        if self.resolution:
            lines.append(f"  grid {'x'.join(str(n) for n in self.resolution)}")
        for v in self.verdicts.values():
            line = f"  {v.condition:<11} {v.status.value}"
            if v.witness is not None:
                w = v.witness.tolist() if isinstance(v.witness, np.ndarray) else v.witness
                line += f"  witness={w}"
            if v.detail:
                line += f"  ({v.detail})"
            lines.append(line)
        lines.append(f"  overall     {'pass' if self.overall else 'fail'}")
        return "\n".join(lines)
