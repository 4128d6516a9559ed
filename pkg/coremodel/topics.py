from dataclasses import dataclass, field
from numbers import Real
from typing import Any, Iterable, Mapping, Optional, Tuple

from .errors import ModelError


class ValueDomain:
    """
    Descriptor of admissible topic values.

    kinds:
    - "scalar"  -> any real number
    - "bool"    -> True / False
    - "vector"  -> sequence of reals; dim=None means any length
    - "enum"    -> one of `choices`
    - "any"     -> opaque payload (records, plans, segments)
    """

    KINDS = ("scalar", "bool", "vector", "enum", "any")

    def __init__(self, kind: str, dim: Optional[int] = None, choices: Iterable[str] = ()):
        if kind not in self.KINDS:
            raise ModelError("unknown_domain", f"value domain kind {kind!r} is not one of {self.KINDS}")
        self.kind = kind
        self.dim = dim
        self.choices = tuple(choices)

    def contains(self, value: Any) -> bool:
        if self.kind == "any":
            return True
        if self.kind == "bool":
            return isinstance(value, bool)
        if self.kind == "scalar":
            return isinstance(value, Real) and not isinstance(value, bool)
        if self.kind == "enum":
            return value in self.choices
        # vector
        try:
            items = list(value)
        except TypeError:
            return False
        if self.dim is not None and len(items) != self.dim:
            return False
        return all(isinstance(v, Real) and not isinstance(v, bool) for v in items)

    def default_value(self):
        if self.kind == "scalar":
            return 0.0
        if self.kind == "bool":
            return False
        if self.kind == "vector":
            return tuple([0.0] * (self.dim or 0))
        if self.kind == "enum":
            return self.choices[0] if self.choices else None
        return None

    def describe(self) -> str:
        if self.kind == "vector":
            return "coord" if self.dim is None else f"vector({self.dim})"
        if self.kind == "enum":
            return f"enum({', '.join(self.choices)})"
        return self.kind

    def __eq__(self, other):
        return (
            isinstance(other, ValueDomain)
            and (self.kind, self.dim, self.choices) == (other.kind, other.dim, other.choices)
        )

    def __hash__(self):
        return hash((self.kind, self.dim, self.choices))

    def __repr__(self):
        return f"ValueDomain({self.describe()})"


SCALAR = ValueDomain("scalar")
BOOL = ValueDomain("bool")
COORD = ValueDomain("vector")
ANY = ValueDomain("any")


@dataclass(frozen=True)
class TopicDecl:
    name: str
    domain: ValueDomain = ANY
    default: Any = None

    def __post_init__(self):
        if self.default is None and self.domain.kind not in ("any",):
            object.__setattr__(self, "default", self.domain.default_value())
        if self.default is not None and not self.domain.contains(self.default):
            raise ModelError(
                "default_outside_domain",
                f"default {self.default!r} of topic {self.name!r} is not in {self.domain.describe()}",
            )


@dataclass(frozen=True)
class Valuation:
    """
    Map from topic name to value. Treated as immutable: `set` returns a copy.
    """
    entries: Mapping[str, Any] = field(default_factory=dict)

    def __getitem__(self, name):
        return self.entries[name]

    def __contains__(self, name):
        return name in self.entries

    def get(self, name, default=None):
        return self.entries.get(name, default)

    def set(self, name: str, value: Any) -> "Valuation":
        entries = dict(self.entries)
        entries[name] = value
        return Valuation(entries)

    def restrict(self, names: Iterable[str]) -> dict:
        return {n: self.entries[n] for n in names if n in self.entries}

    def check(self, topics: Mapping[str, TopicDecl]) -> Optional[Tuple[str, Any]]:
        """
        Returns None when every entry lies in its topic's domain,
        otherwise the first offending (name, value).
        """
        for name, value in self.entries.items():
            decl = topics.get(name)
            if decl is None or not decl.domain.contains(value):
                return name, value
        return None

    @classmethod
    def defaults(cls, topics: Mapping[str, TopicDecl]) -> "Valuation":
        return cls({name: decl.default for name, decl in topics.items()})
