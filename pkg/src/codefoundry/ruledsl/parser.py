#!/usr/bin/env python3
"""
CodeFoundry - Rule Language Parser
LALR grammar (lark) for rule chains and boolean/comparison expressions.

    chain := IF expr THEN verdict (ELSE IF expr THEN verdict)* ELSE verdict
    expr  := or-expr over and-expr over (optionally NOT-prefixed) primaries
"""

import json
import math
import re
from functools import lru_cache
from typing import Iterable, List, Mapping, Optional, Tuple, Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import (
    UnexpectedCharacters,
    UnexpectedEOF,
    UnexpectedInput,
    UnexpectedToken,
    VisitError,
)

from ..errors import MissingElse, RuleError, RuleSyntaxError
from ..specmodel import FieldKind
from .nodes import (
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
)

RULE_GRAMMAR = r"""
    chain: if_branch elif_branch* else_branch?
    if_branch: "IF" or_expr "THEN" verdict
    elif_branch: "ELSE" "IF" or_expr "THEN" verdict
    else_branch: "ELSE" verdict

    expr: or_expr

    ?or_expr: and_expr
            | or_expr "OR" and_expr      -> disjunction
    ?and_expr: not_expr
             | and_expr "AND" not_expr   -> conjunction
    ?not_expr: primary
             | "NOT" not_expr            -> negation
    ?primary: comparison
            | "(" or_expr ")"            -> group
            | NAME                       -> field_ref
    comparison: NAME COMP_OP operand
    ?operand: NAME                       -> field_operand
            | SIGNED_NUMBER              -> number
            | ESCAPED_STRING             -> string
            | "true"                     -> true
            | "false"                    -> false

    verdict: NAME ESCAPED_STRING?

    NAME: /[A-Za-z_][A-Za-z0-9_]*/
    COMP_OP: ">=" | "<=" | "==" | "!=" | ">" | "<"
    COMMENT: /#[^\n]*/

    %import common.SIGNED_NUMBER
    %import common.ESCAPED_STRING
    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

_INTEGER_RE = re.compile(r"^[+-]?\d+$")


@lru_cache(maxsize=1)
def _parser() -> Lark:
    return Lark(RULE_GRAMMAR, start=["chain", "expr"], parser="lalr", maybe_placeholders=False)


def _unquote(token: Token) -> str:
    try:
        return json.loads(token.value)
    except ValueError:
        return token.value[1:-1]


@v_args(inline=True)
class _TreeBuilder(Transformer):
    """Turns lark parse trees into immutable syntax nodes"""

    def __init__(self, verdicts: Optional[VerdictSet] = None):
        super().__init__()
        self.verdicts = verdicts
        self.aliases: List[Tuple[str, str]] = []

    def expr(self, inner: Expr) -> Expr:
        return inner

    def disjunction(self, left: Expr, right: Expr) -> Expr:
        return Disjunction(left, right)

    def conjunction(self, left: Expr, right: Expr) -> Expr:
        return Conjunction(left, right)

    def negation(self, operand: Expr) -> Expr:
        return Negation(operand)

    def group(self, inner: Expr) -> Expr:
        return Group(inner)

    @staticmethod
    def _field(name: Token) -> FieldRef:
        return FieldRef(name.value, line=name.line, column=name.column)

    def field_ref(self, name: Token) -> FieldRef:
        return self._field(name)

    def field_operand(self, name: Token) -> FieldRef:
        return self._field(name)

    def comparison(self, name: Token, op: Token, right: Union[FieldRef, Literal]) -> Comparison:
        return Comparison(self._field(name), op.value, right)

    def number(self, token: Token) -> Literal:
        if _INTEGER_RE.match(token.value):
            return Literal(int(token.value), FieldKind.INTEGER)
        value = float(token.value)
        if not math.isfinite(value):
            raise RuleSyntaxError(
                f"number {token.value} is out of range at line {token.line} column {token.column}",
                line=token.line,
                column=token.column,
            )
        return Literal(value, FieldKind.REAL)

    def string(self, token: Token) -> Literal:
        return Literal(_unquote(token), FieldKind.STRING)

    def true(self) -> Literal:
        return Literal(True, FieldKind.BOOLEAN)

    def false(self) -> Literal:
        return Literal(False, FieldKind.BOOLEAN)

    def verdict(self, name: Token, reason: Optional[Token] = None) -> Verdict:
        code, aliased = self.verdicts.resolve(name.value, line=name.line, column=name.column)
        if aliased:
            self.aliases.append((name.value, code))
        text = _unquote(reason) if reason is not None else self.verdicts.default_reason(code)
        return Verdict(code, text)

    def if_branch(self, guard: Expr, verdict: Verdict) -> Branch:
        return Branch(guard, verdict)

    def elif_branch(self, guard: Expr, verdict: Verdict) -> Branch:
        return Branch(guard, verdict)

    def else_branch(self, verdict: Verdict) -> Verdict:
        return verdict

    def chain(self, *parts: Union[Branch, Verdict]) -> RuleChain:
        branches = tuple(part for part in parts if isinstance(part, Branch))
        defaults = [part for part in parts if isinstance(part, Verdict)]
        if not defaults:
            raise MissingElse("rule chain has no final ELSE branch")
        return RuleChain(branches=branches, default=defaults[0], aliases=tuple(self.aliases))


def _end_position(source: str) -> Tuple[int, int]:
    lines = source.split("\n")
    return len(lines), len(lines[-1]) + 1


def _syntax_error(error: UnexpectedInput, source: str) -> RuleSyntaxError:
    line = getattr(error, "line", None)
    column = getattr(error, "column", None)
    if isinstance(error, UnexpectedToken):
        token = error.token
        if token.type == "$END" or line in (None, -1):
            line, column = _end_position(source)
            found = "end of input"
        else:
            found = repr(token.value)
        expected = ", ".join(sorted(error.expected)) if error.expected else "nothing"
        message = f"unexpected {found} at line {line} column {column}; expected one of: {expected}"
    elif isinstance(error, UnexpectedCharacters):
        message = f"unexpected character {error.char!r} at line {line} column {column}"
    elif isinstance(error, UnexpectedEOF):
        line, column = _end_position(source)
        message = f"unexpected end of input at line {line} column {column}"
    else:
        message = f"syntax error at line {line} column {column}"
    return RuleSyntaxError(message, line=line, column=column)


def _parse(source: str, start: str, builder: _TreeBuilder):
    if not isinstance(source, str):
        raise RuleSyntaxError("rule source must be text")
    try:
        tree = _parser().parse(source, start=start)
    except UnexpectedInput as e:
        raise _syntax_error(e, source) from None
    try:
        return builder.transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, RuleError):
            raise e.orig_exc from None
        raise


def parse_rule(
    source: str, verdict_set: Union[VerdictSet, Mapping[str, str], Iterable[str]]
) -> RuleChain:
    """
    Parse a rule chain.

    Raises:
        RuleSyntaxError: text outside the grammar (with line and column)
        UnknownVerdict: verdict code outside the declared set
        MissingElse: chain without a final ELSE
    """
    verdicts = VerdictSet.coerce(verdict_set)
    return _parse(source, "chain", _TreeBuilder(verdicts))


def parse_expr(source: str) -> Expr:
    """Parse a boolean/comparison expression (validations, guards)"""
    return _parse(source, "expr", _TreeBuilder())
