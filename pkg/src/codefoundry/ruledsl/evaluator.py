#!/usr/bin/env python3
"""
CodeFoundry - Rule Language Evaluator
Pure evaluation of typechecked expressions and chains.

Decision chains are evaluated lazily (first true guard wins, AND/OR
short-circuit) once every referenced field is known to be bound; a null met on
the evaluated path escalates unless the context skips it. Validation
expressions check presence eagerly: any null reference skips the check.
Integers widen to reals; equality on reals is exact.
"""

import operator
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Mapping, Optional

from ..errors import UnboundField
from .nodes import (
    ESCALATION_CODE,
    Comparison,
    Conjunction,
    Disjunction,
    Expr,
    FieldRef,
    Group,
    Literal,
    Negation,
    RuleChain,
    Verdict,
    referenced_fields,
)
from .printer import to_source

_OPERATORS: Dict[str, Callable[[Any, Any], bool]] = {
    ">": operator.gt,
    ">=": operator.ge,
    "<": operator.lt,
    "<=": operator.le,
    "==": operator.eq,
    "!=": operator.ne,
}


class NullPolicy(str, Enum):
    SKIP_VALIDATION = "skip_validation"
    ESCALATE_DECISION = "escalate_decision"


@dataclass(frozen=True)
class EvalContext:
    bindings: Mapping[str, Any]
    null_policy: NullPolicy = NullPolicy.ESCALATE_DECISION


class ValidationStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIPPED_NULL = "skipped_null"


@dataclass(frozen=True)
class ValidationResult:
    status: ValidationStatus
    reason: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.status != ValidationStatus.FAIL


class _NullReference(Exception):
    def __init__(self, field_name: str):
        super().__init__(field_name)
        self.field_name = field_name


def _value(ref: FieldRef, bindings: Mapping[str, Any]) -> Any:
    if ref.name not in bindings:
        raise UnboundField(ref.name)
    value = bindings[ref.name]
    if value is None:
        raise _NullReference(ref.name)
    return value


def _evaluate(node: Expr, bindings: Mapping[str, Any]) -> bool:
    if isinstance(node, FieldRef):
        return bool(_value(node, bindings))
    if isinstance(node, Comparison):
        left = _value(node.left, bindings)
        if isinstance(node.right, Literal):
            right = node.right.value
        else:
            right = _value(node.right, bindings)
        return bool(_OPERATORS[node.op](left, right))
    if isinstance(node, Conjunction):
        return _evaluate(node.left, bindings) and _evaluate(node.right, bindings)
    if isinstance(node, Disjunction):
        return _evaluate(node.left, bindings) or _evaluate(node.right, bindings)
    if isinstance(node, Negation):
        return not _evaluate(node.operand, bindings)
    if isinstance(node, Group):
        return _evaluate(node.inner, bindings)
    if isinstance(node, Literal):
        return bool(node.value)
    raise TypeError(f"Not an expression node: {node!r}")


def evaluate_expr(expr: Expr, bindings: Mapping[str, Any]) -> Optional[bool]:
    """Truth value of `expr`, or None when a null is met on the evaluated path"""
    try:
        return _evaluate(expr, bindings)
    except _NullReference:
        return None


def evaluate_chain(chain: RuleChain, ctx: EvalContext) -> Verdict:
    """
    Verdict of the first branch whose guard holds, else the default.

    A null met on the evaluated path escalates under ESCALATE_DECISION;
    under SKIP_VALIDATION that guard counts as not holding.

    Raises:
        UnboundField: a referenced field is absent from the context, checked
            for every branch whether or not it is reached
    """
    for name in referenced_fields(chain):
        if name not in ctx.bindings:
            raise UnboundField(name)
    for branch in chain.branches:
        try:
            if _evaluate(branch.guard, ctx.bindings):
                return branch.verdict
        except _NullReference as e:
            if ctx.null_policy == NullPolicy.SKIP_VALIDATION:
                continue
            return Verdict(ESCALATION_CODE, f"missing field {e.field_name}")
    return chain.default


def evaluate_validation(
    expr: Expr, ctx: EvalContext, reason: Optional[str] = None
) -> ValidationResult:
    """
    pass / fail(reason) / skipped_null for a validation expression.

    The failure reason is `reason` when given, else the expression text.
    """
    for name in referenced_fields(expr):
        if name not in ctx.bindings:
            raise UnboundField(name)
    if any(ctx.bindings[name] is None for name in referenced_fields(expr)):
        return ValidationResult(ValidationStatus.SKIPPED_NULL)
    if _evaluate(expr, ctx.bindings):
        return ValidationResult(ValidationStatus.PASS)
    return ValidationResult(ValidationStatus.FAIL, reason or to_source(expr))
