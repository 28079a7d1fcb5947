#!/usr/bin/env python3
"""
CodeFoundry - Rule Language Syntax Tree
Immutable nodes for expressions and IF/ELSE IF/ELSE rule chains, plus the
verdict set a chain is checked against.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

from ..errors import UnknownVerdict
from ..specmodel import VERDICT_CODE_RE, FieldKind

LOG = logging.getLogger("CodeFoundry.ruledsl")

Value = Union[bool, int, float, str]

COMPARISON_OPS = (">", ">=", "<", "<=", "==", "!=")
EQUALITY_OPS = ("==", "!=")
ESCALATION_CODE = "HUMAN_REVIEW"

DEFAULT_REASONS: Dict[str, str] = {
    "APPROVED": "Meets criteria",
    "DENIED": "Does not meet criteria",
    ESCALATION_CODE: "Escalated for human review",
}

DEFAULT_ALIASES: Dict[str, str] = {
    "APPROVE": "APPROVED",
    "DENY": "DENIED",
    "REVIEW": ESCALATION_CODE,
    "ESCALATE": ESCALATION_CODE,
}


class Expr:
    """Base class of expression nodes"""


@dataclass(frozen=True)
class FieldRef(Expr):
    name: str
    line: Optional[int] = field(default=None, compare=False)
    column: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class Literal(Expr):
    value: Value
    kind: FieldKind


@dataclass(frozen=True)
class Comparison(Expr):
    left: FieldRef
    op: str
    right: Union[FieldRef, Literal]


@dataclass(frozen=True)
class Conjunction(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Disjunction(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Negation(Expr):
    operand: Expr


@dataclass(frozen=True)
class Group(Expr):
    inner: Expr


@dataclass(frozen=True)
class Verdict:
    code: str
    reason: str


@dataclass(frozen=True)
class Branch:
    guard: Expr
    verdict: Verdict


@dataclass(frozen=True)
class RuleChain:
    """First-match chain of guarded verdicts with a mandatory default"""

    branches: Tuple[Branch, ...]
    default: Verdict
    aliases: Tuple[Tuple[str, str], ...] = field(default=(), compare=False)

    @property
    def verdicts(self) -> List[Verdict]:
        return [branch.verdict for branch in self.branches] + [self.default]


def referenced_fields(node: Union[Expr, RuleChain]) -> List[str]:
    """Distinct field names in source order"""
    names: List[str] = []

    def visit(current: object) -> None:
        if isinstance(current, FieldRef):
            if current.name not in names:
                names.append(current.name)
        elif isinstance(current, Comparison):
            visit(current.left)
            visit(current.right)
        elif isinstance(current, (Conjunction, Disjunction)):
            visit(current.left)
            visit(current.right)
        elif isinstance(current, Negation):
            visit(current.operand)
        elif isinstance(current, Group):
            visit(current.inner)
        elif isinstance(current, RuleChain):
            for branch in current.branches:
                visit(branch.guard)

    visit(node)
    return names


class VerdictSet:
    """Declared verdict codes with default reasons and accepted aliases"""

    def __init__(
        self,
        defaults: Mapping[str, str],
        aliases: Optional[Mapping[str, str]] = None,
    ):
        reasons = dict(defaults)
        reasons.setdefault(ESCALATION_CODE, DEFAULT_REASONS[ESCALATION_CODE])
        for code in reasons:
            if not VERDICT_CODE_RE.match(code):
                raise ValueError(f"Invalid verdict code: {code!r}")
        self._reasons = reasons
        alias_map = DEFAULT_ALIASES if aliases is None else aliases
        self._aliases = {
            alias: target
            for alias, target in alias_map.items()
            if target in reasons and alias not in reasons
        }

    @classmethod
    def coerce(cls, value: Union["VerdictSet", Mapping[str, str], Iterable[str]]) -> "VerdictSet":
        if isinstance(value, VerdictSet):
            return value
        if isinstance(value, Mapping):
            return cls(value)
        codes = list(value)
        if not codes:
            raise ValueError("verdict set must not be empty")
        return cls({code: DEFAULT_REASONS.get(code, code) for code in codes})

    @property
    def codes(self) -> frozenset:
        return frozenset(self._reasons)

    @property
    def aliases(self) -> Dict[str, str]:
        return dict(self._aliases)

    def __contains__(self, code: object) -> bool:
        return code in self._reasons

    def resolve(
        self, code: str, line: Optional[int] = None, column: Optional[int] = None
    ) -> Tuple[str, bool]:
        """Canonical code and whether an alias was used"""
        if code in self._reasons:
            return code, False
        if code in self._aliases:
            return self._aliases[code], True
        raise UnknownVerdict(code, line=line, column=column)

    def default_reason(self, code: str) -> str:
        return self._reasons[code]

    def to_dict(self) -> Dict[str, str]:
        return dict(sorted(self._reasons.items()))
