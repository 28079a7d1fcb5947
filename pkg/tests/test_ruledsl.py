"""Tests for the rule language: parsing, type checking, evaluation, printing"""

import itertools
import random

import pytest

from codefoundry.errors import MissingElse, RuleSyntaxError, UnboundField, UnknownVerdict
from codefoundry.ruledsl import (
    Comparison,
    EvalContext,
    Literal,
    NullPolicy,
    ValidationStatus,
    VerdictSet,
    evaluate_chain,
    evaluate_expr,
    evaluate_validation,
    parse_expr,
    parse_rule,
    referenced_fields,
    to_source,
    typecheck,
)
from codefoundry.specmodel import FieldKind

from .conftest import GLP1_LOGIC

VERDICTS = VerdictSet({"APPROVED": "Meets criteria", "DENIED": "Does not meet criteria"})

GLP1_SCOPE = {
    "has_t2d_diagnosis": FieldKind.BOOLEAN,
    "current_a1c": FieldKind.REAL,
    "bmi": FieldKind.REAL,
    "has_step_therapy_failure": FieldKind.BOOLEAN,
    "patient_chart_summary": FieldKind.TEXT,
}


def _bindings(**overrides):
    values = {
        "has_t2d_diagnosis": False,
        "current_a1c": 5.6,
        "bmi": 32.0,
        "has_step_therapy_failure": True,
    }
    values.update(overrides)
    return values


class TestParseRule:
    def test_glp1_chain_structure(self):
        chain = parse_rule(GLP1_LOGIC, VERDICTS)
        assert len(chain.branches) == 2
        assert chain.branches[0].verdict.reason == "Type 2 Diabetes Diagnosis"
        assert chain.default.code == "DENIED"
        assert referenced_fields(chain) == ["has_t2d_diagnosis", "bmi", "has_step_therapy_failure"]

    def test_aliases_resolve_and_are_recorded(self):
        """APPROVE/DENY are accepted and mapped to the declared codes"""
        chain = parse_rule("IF x THEN APPROVE ELSE DENY", VERDICTS)
        assert chain.branches[0].verdict.code == "APPROVED"
        assert chain.default.code == "DENIED"
        assert ("APPROVE", "APPROVED") in chain.aliases
        # A verdict without a reason carries the declared default reason
        assert chain.default.reason == "Does not meet criteria"

    def test_human_review_always_declared(self):
        chain = parse_rule('IF x THEN HUMAN_REVIEW "Check" ELSE APPROVED', VERDICTS)
        assert chain.branches[0].verdict.code == "HUMAN_REVIEW"

    def test_unknown_verdict(self):
        with pytest.raises(UnknownVerdict) as exc_info:
            parse_rule("IF x THEN MAYBE ELSE DENIED", VERDICTS)
        assert exc_info.value.code == "MAYBE"
        assert exc_info.value.line == 1

    def test_missing_else(self):
        with pytest.raises(MissingElse):
            parse_rule("IF x THEN APPROVED", VERDICTS)

    def test_syntax_error_position(self):
        with pytest.raises(RuleSyntaxError) as exc_info:
            parse_rule("IF x THEN APPROVED\nELSE IF bmi >> 3 THEN DENIED\nELSE DENIED", VERDICTS)
        assert exc_info.value.line == 2

    def test_free_python_is_rejected(self):
        """Anything outside the closed grammar is a syntax error"""
        with pytest.raises(RuleSyntaxError):
            parse_rule("import os\nELSE APPROVED", VERDICTS)
        with pytest.raises(RuleSyntaxError):
            parse_rule('IF __import__("os") THEN APPROVED ELSE DENIED', VERDICTS)

    def test_comments_are_ignored(self):
        chain = parse_rule("# gate\nIF x THEN APPROVED # ok\nELSE DENIED", VERDICTS)
        assert len(chain.branches) == 1

    def test_precedence(self):
        """NOT binds tighter than AND, which binds tighter than OR"""
        expr = parse_expr("a OR b AND NOT c")
        assert to_source(expr) == "a OR b AND NOT c"
        assert evaluate_expr(expr, {"a": False, "b": True, "c": False}) is True
        assert evaluate_expr(expr, {"a": False, "b": True, "c": True}) is False

    def test_number_literal_kinds(self):
        assert parse_expr("bmi >= 30").right == Literal(30, FieldKind.INTEGER)
        assert parse_expr("bmi >= 30.5").right == Literal(30.5, FieldKind.REAL)

    def test_out_of_range_number_is_rejected(self):
        with pytest.raises(RuleSyntaxError) as exc_info:
            parse_expr("amount > 1e999")
        assert exc_info.value.column == 10

    def test_field_to_field_comparison(self):
        expr = parse_expr("claimed > limit")
        assert isinstance(expr, Comparison)
        assert evaluate_expr(expr, {"claimed": 10, "limit": 5}) is True


class TestTypecheck:
    def test_glp1_chain_is_well_typed(self):
        assert typecheck(parse_rule(GLP1_LOGIC, VERDICTS), GLP1_SCOPE) == []

    def test_unknown_field(self):
        diagnostics = typecheck(parse_expr("weight > 3"), GLP1_SCOPE)
        assert [d.code for d in diagnostics] == ["unknown_field"]
        assert diagnostics[0].field == "weight"
        assert diagnostics[0].span == "line 1 column 1"

    def test_boolean_against_number(self):
        diagnostics = typecheck(parse_expr("has_t2d_diagnosis > 1"), GLP1_SCOPE)
        assert [d.code for d in diagnostics] == ["kind_mismatch"]

    def test_ordered_comparison_on_text(self):
        diagnostics = typecheck(parse_expr('patient_chart_summary < "m"'), GLP1_SCOPE)
        assert [d.code for d in diagnostics] == ["kind_mismatch"]

    def test_text_equality_is_allowed(self):
        assert typecheck(parse_expr('patient_chart_summary == "none"'), GLP1_SCOPE) == []

    def test_integer_and_real_interoperate(self):
        assert typecheck(parse_expr("bmi >= 30"), GLP1_SCOPE) == []

    def test_numeric_field_as_condition(self):
        diagnostics = typecheck(parse_expr("bmi AND has_t2d_diagnosis"), GLP1_SCOPE)
        assert [d.code for d in diagnostics] == ["kind_mismatch"]


class TestEvaluate:
    @pytest.fixture
    def chain(self):
        return parse_rule(GLP1_LOGIC, VERDICTS)

    @pytest.mark.parametrize(
        "overrides, code, reason",
        [
            ({"has_t2d_diagnosis": True}, "APPROVED", "Type 2 Diabetes Diagnosis"),
            ({}, "APPROVED", "BMI>=30 + Step Therapy"),
            ({"bmi": 28.0}, "DENIED", "Does not meet criteria"),
            ({"has_step_therapy_failure": False}, "DENIED", "Does not meet criteria"),
        ],
    )
    def test_first_match_wins(self, chain, overrides, code, reason):
        verdict = evaluate_chain(chain, EvalContext(_bindings(**overrides)))
        assert (verdict.code, verdict.reason) == (code, reason)

    def test_null_on_evaluated_path_escalates(self, chain):
        verdict = evaluate_chain(chain, EvalContext(_bindings(bmi=None)))
        assert verdict.code == "HUMAN_REVIEW"
        assert "bmi" in verdict.reason

    def test_null_off_evaluated_path_is_ignored(self, chain):
        """A matched earlier branch never looks at later fields"""
        verdict = evaluate_chain(chain, EvalContext(_bindings(has_t2d_diagnosis=True, bmi=None)))
        assert verdict.code == "APPROVED"

    def test_unbound_field_is_an_error(self, chain):
        bindings = _bindings()
        del bindings["bmi"]
        with pytest.raises(UnboundField):
            evaluate_chain(chain, EvalContext(bindings))

    def test_unbound_field_on_unreached_branch_is_an_error(self, chain):
        """Binding is checked for every branch before any guard runs"""
        bindings = _bindings(has_t2d_diagnosis=True)
        del bindings["has_step_therapy_failure"]
        with pytest.raises(UnboundField) as exc_info:
            evaluate_chain(chain, EvalContext(bindings))
        assert exc_info.value.field_name == "has_step_therapy_failure"

    @pytest.mark.parametrize(
        "policy, code",
        [
            (NullPolicy.ESCALATE_DECISION, "HUMAN_REVIEW"),
            (NullPolicy.SKIP_VALIDATION, "DENIED"),
        ],
    )
    def test_null_policy(self, chain, policy, code):
        """Skipping treats a guard that meets a null as not holding"""
        verdict = evaluate_chain(chain, EvalContext(_bindings(bmi=None), policy))
        assert verdict.code == code

    def test_skipped_guard_falls_through_to_later_branch(self):
        chain = parse_rule(
            'IF bmi >= 30 THEN APPROVED "Obese"\nELSE IF has_t2d_diagnosis THEN APPROVED "T2D"\n'
            "ELSE DENIED",
            VERDICTS,
        )
        ctx = EvalContext(_bindings(bmi=None, has_t2d_diagnosis=True), NullPolicy.SKIP_VALIDATION)
        assert evaluate_chain(chain, ctx).reason == "T2D"

    def test_validation_outcomes(self):
        expr = parse_expr("current_a1c > 3.0 AND current_a1c < 20.0")
        ctx = EvalContext({"current_a1c": 8.1}, NullPolicy.SKIP_VALIDATION)
        assert evaluate_validation(expr, ctx).status == ValidationStatus.PASS

        failed = evaluate_validation(
            expr, EvalContext({"current_a1c": 25.0}), reason="Suspicious A1C"
        )
        assert failed.status == ValidationStatus.FAIL
        assert failed.reason == "Suspicious A1C"
        assert not failed.passed

        skipped = evaluate_validation(expr, EvalContext({"current_a1c": None}))
        assert skipped.status == ValidationStatus.SKIPPED_NULL
        assert skipped.passed

    def test_validation_reason_defaults_to_expression(self):
        expr = parse_expr("bmi > 10 AND bmi < 100")
        result = evaluate_validation(expr, EvalContext({"bmi": 400.0}))
        assert result.reason == "bmi > 10 AND bmi < 100"


class TestPrinter:
    def test_canonical_source_reparses_to_same_tree(self):
        chain = parse_rule(GLP1_LOGIC, VERDICTS)
        assert parse_rule(to_source(chain), VERDICTS) == chain

    def test_nested_groups_print_with_parentheses(self):
        expr = parse_expr("NOT (a OR b) AND c")
        assert to_source(expr) == "NOT (a OR b) AND c"


def _random_expr(rng, depth):
    """(source, predicate over bindings); every compound is parenthesized"""
    if depth == 0 or rng.random() < 0.3:
        leaf = rng.choice(["a", "b", "c", "n > 3", "n == 2", "n <= 1"])
        if leaf in ("a", "b", "c"):
            return leaf, lambda env, name=leaf: env[name]
        name, op, limit = leaf.split()
        check = {">": lambda x, y: x > y, "==": lambda x, y: x == y, "<=": lambda x, y: x <= y}
        return leaf, lambda env, f=check[op], k=int(limit): f(env[name], k)
    kind = rng.choice(["AND", "OR", "NOT"])
    if kind == "NOT":
        source, inner = _random_expr(rng, depth - 1)
        return f"NOT ({source})", lambda env: not inner(env)
    left_src, left = _random_expr(rng, depth - 1)
    right_src, right = _random_expr(rng, depth - 1)
    if kind == "AND":
        return f"({left_src}) AND ({right_src})", lambda env: left(env) and right(env)
    return f"({left_src}) OR ({right_src})", lambda env: left(env) or right(env)


class TestProperties:
    @pytest.mark.parametrize(
        "source, expected",
        [
            ("a AND (b OR NOT c)", lambda a, b, c: a and (b or not c)),
            ("a OR b AND NOT c", lambda a, b, c: a or (b and not c)),
            ("NOT (a AND b) OR c", lambda a, b, c: (not (a and b)) or c),
        ],
    )
    def test_exhaustive_truth_tables(self, source, expected):
        expr = parse_expr(source)
        for a, b, c in itertools.product([True, False], repeat=3):
            assert evaluate_expr(expr, {"a": a, "b": b, "c": c}) is expected(a, b, c)

    def test_random_expressions_evaluate_and_reprint(self):
        rng = random.Random(20261017)
        for _ in range(200):
            source, predicate = _random_expr(rng, depth=4)
            expr = parse_expr(source)
            assert parse_expr(to_source(expr)) == expr
            flags = [True, False]
            for a, b, c, n in itertools.product(flags, flags, flags, range(5)):
                env = {"a": a, "b": b, "c": c, "n": n}
                assert evaluate_expr(expr, env) is bool(predicate(env)), source

    def test_total_chain_never_falls_through(self):
        """Every assignment lands on exactly one verdict of a chain with an ELSE"""
        chain = parse_rule(
            "IF a AND b THEN APPROVED\nELSE IF c THEN DENIED\nELSE HUMAN_REVIEW", VERDICTS
        )
        seen = set()
        for a, b, c in itertools.product([True, False], repeat=3):
            verdict = evaluate_chain(chain, EvalContext({"a": a, "b": b, "c": c}))
            seen.add(verdict.code)
        assert seen == {"APPROVED", "DENIED", "HUMAN_REVIEW"}
