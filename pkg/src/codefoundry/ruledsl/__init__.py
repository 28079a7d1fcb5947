#!/usr/bin/env python3
"""
CodeFoundry - Rule Language
Closed decision language: IF/ELSE IF/ELSE chains over comparisons and
AND/OR/NOT, with a parser, type checker, evaluator and canonical printer.
"""

from .checker import TypeChecker, TypeDiagnostic, typecheck
from .evaluator import (
    EvalContext,
    NullPolicy,
    ValidationResult,
    ValidationStatus,
    evaluate_chain,
    evaluate_expr,
    evaluate_validation,
)
from .nodes import (
    COMPARISON_OPS,
    DEFAULT_ALIASES,
    DEFAULT_REASONS,
    ESCALATION_CODE,
    Branch,
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
    VerdictSet,
    referenced_fields,
)
from .parser import parse_expr, parse_rule
from .printer import to_source

__all__ = [
    "COMPARISON_OPS",
    "DEFAULT_ALIASES",
    "DEFAULT_REASONS",
    "ESCALATION_CODE",
    "Branch",
    "Comparison",
    "Conjunction",
    "Disjunction",
    "EvalContext",
    "Expr",
    "FieldRef",
    "Group",
    "Literal",
    "Negation",
    "NullPolicy",
    "RuleChain",
    "TypeChecker",
    "TypeDiagnostic",
    "ValidationResult",
    "ValidationStatus",
    "Verdict",
    "VerdictSet",
    "evaluate_chain",
    "evaluate_expr",
    "evaluate_validation",
    "parse_expr",
    "parse_rule",
    "referenced_fields",
    "to_source",
    "typecheck",
]
