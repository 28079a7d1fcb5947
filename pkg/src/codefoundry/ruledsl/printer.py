#!/usr/bin/env python3
"""
CodeFoundry - Rule Language Printer
Canonical source text for expressions and chains. Artifacts store this form;
it re-parses to a structurally equal tree.
"""

import json
from typing import Union

from .nodes import (
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
)


def _literal(node: Literal) -> str:
    if isinstance(node.value, bool):
        return "true" if node.value else "false"
    if isinstance(node.value, str):
        return json.dumps(node.value)
    if isinstance(node.value, float):
        return repr(node.value)
    return str(node.value)


def _wrap(node: Expr, *needs_parens: type) -> str:
    text = _expr(node)
    if isinstance(node, needs_parens):
        return f"({text})"
    return text


def _expr(node: Expr) -> str:
    if isinstance(node, FieldRef):
        return node.name
    if isinstance(node, Literal):
        return _literal(node)
    if isinstance(node, Comparison):
        return f"{node.left.name} {node.op} {_expr(node.right)}"
    if isinstance(node, Group):
        return f"({_expr(node.inner)})"
    if isinstance(node, Negation):
        return f"NOT {_wrap(node.operand, Conjunction, Disjunction)}"
    if isinstance(node, Conjunction):
        left = _wrap(node.left, Disjunction)
        right = _wrap(node.right, Conjunction, Disjunction)
        return f"{left} AND {right}"
    if isinstance(node, Disjunction):
        return f"{_expr(node.left)} OR {_wrap(node.right, Disjunction)}"
    raise TypeError(f"Not an expression node: {node!r}")


def _verdict(verdict: Verdict) -> str:
    return f"{verdict.code} {json.dumps(verdict.reason)}"


def to_source(node: Union[Expr, RuleChain]) -> str:
    if isinstance(node, RuleChain):
        lines = []
        for index, branch in enumerate(node.branches):
            keyword = "IF" if index == 0 else "ELSE IF"
            lines.append(f"{keyword} {_expr(branch.guard)} THEN {_verdict(branch.verdict)}")
        lines.append(f"ELSE {_verdict(node.default)}")
        return "\n".join(lines)
    return _expr(node)
