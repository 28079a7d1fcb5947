"""Tests for workflow specification parsing and cross-field validation"""

import pytest

from codefoundry.errors import (
    InvalidFieldValue,
    MalformedDocument,
    MissingRequiredField,
    UnknownField,
)
from codefoundry.specmodel import (
    FieldKind,
    StepType,
    parse_spec,
    serialize_spec,
    validate_spec,
)

from .conftest import EXPENSE_SPEC, GLP1_WORKFLOW_ID


def _codes(spec):
    return [d.code for d in validate_spec(spec)]


class TestParseSpec:
    """Strict-mode parsing of the YAML document"""

    def test_glp1_workflow_loads(self, glp1_spec):
        """The shipped workflow parses with aliases resolved"""
        assert glp1_spec.name == "GLP-1 Agonist Medical Necessity Review"
        assert glp1_spec.workflow_id == GLP1_WORKFLOW_ID
        assert glp1_spec.compliance_tags == ("HIPAA", "CMS_Decision_Timeframes")
        assert glp1_spec.shapes == "BR"

        extract = glp1_spec.step("extract_clinical_factors")
        assert extract.step_type == StepType.BOUNDED_INVOCATION
        assert extract.schema.field_names == [
            "has_t2d_diagnosis",
            "current_a1c",
            "bmi",
            "has_step_therapy_failure",
        ]
        # float is an alias of real
        assert extract.schema.as_dict()["bmi"].kind == FieldKind.REAL
        assert extract.validations[1].reason == "Suspicious A1C"
        assert extract.validations[0].reason is None

    def test_glp1_workflow_is_valid(self, glp1_spec):
        assert validate_spec(glp1_spec) == []

    def test_version_defaults(self, expense_spec):
        assert expense_spec.version == "v1.0"
        assert expense_spec.input_kinds() == {
            "amount": FieldKind.REAL,
            "has_receipt": FieldKind.BOOLEAN,
        }

    def test_numeric_version_is_text(self):
        spec = parse_spec(EXPENSE_SPEC.replace('name: "Expense Check"', 'name: "E"\n  version: 2'))
        assert spec.version == "2"

    def test_unknown_top_level_key(self):
        with pytest.raises(UnknownField) as exc_info:
            parse_spec(EXPENSE_SPEC + "extras: true\n")
        assert exc_info.value.path == "extras"

    def test_unknown_step_key(self):
        step_type = "    type: deterministic_rule"
        text = EXPENSE_SPEC.replace(step_type, step_type + "\n    owner: x")
        with pytest.raises(UnknownField) as exc_info:
            parse_spec(text)
        assert exc_info.value.path == "logic_requirements[0].owner"

    def test_missing_name(self):
        with pytest.raises(MissingRequiredField) as exc_info:
            parse_spec("metadata: {version: v1}\nlogic_requirements: []\n")
        assert exc_info.value.path == "metadata.name"

    def test_missing_logic_requirements(self):
        with pytest.raises(MissingRequiredField):
            parse_spec("metadata: {name: Empty}\n")

    def test_unsupported_step_type(self):
        text = EXPENSE_SPEC.replace("type: deterministic_rule", "type: free_form")
        with pytest.raises(InvalidFieldValue, match="free_form"):
            parse_spec(text)

    def test_schema_kind_text_not_allowed(self):
        """Extraction fields are bounded kinds; open text is for inputs only"""
        text = """
metadata: {name: Bad Schema}
logic_requirements:
  - step: extract
    type: bounded_invocation
    schema: {notes: text}
"""
        with pytest.raises(InvalidFieldValue):
            parse_spec(text)

    def test_yaml_syntax_error_has_position(self):
        with pytest.raises(MalformedDocument) as exc_info:
            parse_spec("metadata: {name: [unclosed\n")
        assert exc_info.value.line is not None

    def test_non_mapping_root(self):
        with pytest.raises(MalformedDocument):
            parse_spec("- just\n- a list\n")

    def test_nullable_long_form(self):
        text = """
metadata: {name: Nullable}
logic_requirements:
  - step: extract
    type: bounded_invocation
    schema:
      score: {kind: integer, nullable: false}
      label: string
"""
        schema = parse_spec(text).steps[0].schema.as_dict()
        assert schema["score"].nullable is False
        assert schema["label"].nullable is True

    def test_workflow_id_with_leading_digit(self):
        spec = parse_spec("metadata: {name: '2024 Audit'}\nlogic_requirements: []\n")
        assert spec.workflow_id == "wf_2024_audit"


class TestSerializeSpec:
    def test_serialized_text_parses_back(self, glp1_spec):
        """Serialization preserves the model, including validation reasons"""
        assert parse_spec(serialize_spec(glp1_spec)) == glp1_spec

    def test_canonical_kinds_are_written(self, glp1_spec):
        text = serialize_spec(glp1_spec)
        assert "current_a1c: real" in text
        assert "float" not in text


class TestValidateSpec:
    """Cross-field invariants reported as diagnostics"""

    def test_no_steps(self):
        spec = parse_spec("metadata: {name: Empty}\nlogic_requirements: []\n")
        assert _codes(spec) == ["no_steps"]

    def test_duplicate_step_and_input(self):
        text = """
metadata: {name: Dupes}
inputs:
  - {name: note, type: text}
  - {name: note, type: text}
logic_requirements:
  - {step: decide, type: deterministic_rule, logic: "ELSE APPROVED"}
  - {step: decide, type: deterministic_rule, logic: "ELSE APPROVED"}
"""
        codes = _codes(parse_spec(text))
        assert "duplicate_input" in codes
        assert "duplicate_step" in codes

    def test_field_shadowing_an_input(self):
        text = """
metadata: {name: Shadow}
inputs:
  - {name: bmi, type: real}
logic_requirements:
  - step: extract
    type: bounded_invocation
    schema: {bmi: real}
"""
        assert "field_collision" in _codes(parse_spec(text))

    def test_bounded_step_needs_schema(self):
        text = """
metadata: {name: No Schema}
logic_requirements:
  - {step: extract, type: bounded_invocation}
"""
        assert _codes(parse_spec(text)) == ["missing_schema"]

    def test_rule_step_needs_logic(self):
        text = """
metadata: {name: No Logic}
logic_requirements:
  - {step: decide, type: deterministic_rule}
"""
        assert _codes(parse_spec(text)) == ["missing_logic"]

    def test_validation_with_unknown_field(self):
        text = """
metadata: {name: Unknown Ref}
logic_requirements:
  - step: extract
    type: bounded_invocation
    schema: {bmi: real}
    validation: ["weight > 0"]
"""
        diagnostics = validate_spec(parse_spec(text))
        assert [d.code for d in diagnostics] == ["unknown_field"]
        assert diagnostics[0].path == "logic_requirements[0].validation[0]"

    def test_unparseable_validation(self):
        text = """
metadata: {name: Broken}
logic_requirements:
  - step: extract
    type: bounded_invocation
    schema: {bmi: real}
    validation: ["bmi >"]
"""
        assert _codes(parse_spec(text)) == ["unparseable_expression"]

    def test_lowercase_verdict_code(self):
        text = """
metadata:
  name: Verdicts
  verdicts: {approved: "Fine"}
logic_requirements:
  - {step: decide, type: deterministic_rule, logic: "ELSE APPROVED"}
"""
        assert "invalid_verdict_code" in _codes(parse_spec(text))
