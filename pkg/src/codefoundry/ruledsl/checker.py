#!/usr/bin/env python3
"""
CodeFoundry - Rule Language Type Checker
Resolves every field reference against the declared scope (inputs plus
extraction schemas) and checks comparison kinds:

  - integer and real interoperate under every operator
  - string/text compare only with == and !=
  - booleans appear bare or with == and !=
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Union

from ..specmodel import FieldDecl, FieldKind
from .nodes import (
    EQUALITY_OPS,
    Comparison,
    Conjunction,
    Disjunction,
    Expr,
    FieldRef,
    Group,
    Literal,
    Negation,
    RuleChain,
)

Scope = Mapping[str, Union[FieldKind, FieldDecl]]


@dataclass(frozen=True)
class TypeDiagnostic:
    code: str
    message: str
    field: Optional[str] = None
    line: Optional[int] = None
    column: Optional[int] = None

    @property
    def span(self) -> Optional[str]:
        if self.line is None:
            return None
        return f"line {self.line} column {self.column}"

    def to_dict(self) -> Dict[str, object]:
        return {
            "code": self.code,
            "message": self.message,
            "field": self.field,
            "line": self.line,
            "column": self.column,
        }


class TypeChecker:
    """Walks a tree once; `resolved` maps each referenced field to its kind"""

    def __init__(self, scope: Scope):
        self.scope: Dict[str, FieldKind] = {
            name: decl.kind if isinstance(decl, FieldDecl) else decl for name, decl in scope.items()
        }
        self.resolved: Dict[str, FieldKind] = {}
        self.diagnostics: List[TypeDiagnostic] = []

    def _lookup(self, ref: FieldRef) -> Optional[FieldKind]:
        kind = self.scope.get(ref.name)
        if kind is None:
            self.diagnostics.append(
                TypeDiagnostic(
                    code="unknown_field",
                    message=f"unknown field {ref.name}",
                    field=ref.name,
                    line=ref.line,
                    column=ref.column,
                )
            )
            return None
        self.resolved[ref.name] = kind
        return kind

    def _mismatch(self, node: Comparison, message: str) -> None:
        self.diagnostics.append(
            TypeDiagnostic(
                code="kind_mismatch",
                message=message,
                field=node.left.name,
                line=node.left.line,
                column=node.left.column,
            )
        )

    def _comparison(self, node: Comparison) -> None:
        left = self._lookup(node.left)
        if isinstance(node.right, FieldRef):
            right = self._lookup(node.right)
        else:
            right = node.right.kind
        if left is None or right is None:
            return

        if left.is_numeric and right.is_numeric:
            return
        if left.is_textual and right.is_textual:
            if node.op not in EQUALITY_OPS:
                self._mismatch(
                    node, f"ordered comparison '{node.op}' on string field {node.left.name}"
                )
            return
        if left == FieldKind.BOOLEAN and right == FieldKind.BOOLEAN:
            if node.op not in EQUALITY_OPS:
                self._mismatch(
                    node, f"boolean field {node.left.name} in ordered comparison '{node.op}'"
                )
            return
        self._mismatch(
            node, f"cannot compare {left.value} field {node.left.name} with {right.value}"
        )

    def check(self, node: Union[Expr, RuleChain]) -> List[TypeDiagnostic]:
        if isinstance(node, RuleChain):
            for branch in node.branches:
                self.check(branch.guard)
        elif isinstance(node, FieldRef):
            kind = self._lookup(node)
            if kind is not None and kind != FieldKind.BOOLEAN:
                self.diagnostics.append(
                    TypeDiagnostic(
                        code="kind_mismatch",
                        message=f"{kind.value} field {node.name} used as a condition",
                        field=node.name,
                        line=node.line,
                        column=node.column,
                    )
                )
        elif isinstance(node, Comparison):
            self._comparison(node)
        elif isinstance(node, (Conjunction, Disjunction)):
            self.check(node.left)
            self.check(node.right)
        elif isinstance(node, Negation):
            self.check(node.operand)
        elif isinstance(node, Group):
            self.check(node.inner)
        elif isinstance(node, Literal):
            if node.kind != FieldKind.BOOLEAN:
                self.diagnostics.append(
                    TypeDiagnostic(
                        code="kind_mismatch", message="non-boolean literal used as a condition"
                    )
                )
        return self.diagnostics


def typecheck(node: Union[Expr, RuleChain], scope: Scope) -> List[TypeDiagnostic]:
    """Diagnostics for `node` against a field scope (empty when well-typed)"""
    return TypeChecker(scope).check(node)
