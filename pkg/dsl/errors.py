from dataclasses import dataclass
from typing import List, Optional

from coremodel.errors import RTAError


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int = 0
    column: int = 0

    def to_dict(self) -> dict:
        return {"error": self.code, "detail": self.message, "line": self.line, "column": self.column}

    def __str__(self):
        return f"{self.line}:{self.column}: {self.code}: {self.message}"


class DslError(RTAError):
    """
    Parse or elaboration failure. `line`/`column` point at the first
    diagnostic; `diagnostics` holds all of them (1-based, 0 = unknown).
    """

    def __init__(self, code: str, detail: str = "", line: int = 0, column: int = 0,
                 diagnostics: Optional[List[Diagnostic]] = None):
        super().__init__(code, detail)
        self.line = line
        self.column = column
        self.diagnostics = list(diagnostics or [Diagnostic(code, self.detail, line, column)])

    @classmethod
    def from_diagnostics(cls, diagnostics: List[Diagnostic]) -> "DslError":
        first = diagnostics[0]
        return cls(first.code, first.message, first.line, first.column, diagnostics)

    def to_dict(self):
        return {**super().to_dict(), "line": self.line, "column": self.column,
                "diagnostics": [d.to_dict() for d in self.diagnostics]}
