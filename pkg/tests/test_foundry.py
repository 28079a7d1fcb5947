"""Tests for template selection, prompt assembly and the compile loop"""

import json

import pytest

from codefoundry.artifact import CompiledArtifact
from codefoundry.config import GlobalConfig
from codefoundry.errors import (
    AmbiguousTemplate,
    CompilationFailed,
    MissingCapability,
    NoCompatibleTemplate,
    RoleViolation,
    SlotMismatch,
    SpecError,
    UnknownComplianceTag,
    ValidatorError,
)
from codefoundry.foundry import (
    PROMPT_SECTIONS,
    CodeFoundry,
    CompilePolicy,
    assemble_artifact,
    assemble_prompt,
    compile_workflow,
    select_modules,
    select_template,
    split_generated_logic,
)
from codefoundry.generators import ClientRole, FixtureGenerator, ScriptedGenerator
from codefoundry.metrics import TokenLedger
from codefoundry.specmodel import parse_spec
from codefoundry.validator import PipelineConfig, ValidationStage

from .conftest import EXPENSE_SPEC, GLP1_LOGIC, GLP1_WORKFLOW_ID

THREE_RULES = """
metadata: {name: Three Stage}
inputs:
  - {name: amount, type: real}
logic_requirements:
  - {step: first, type: deterministic_rule, logic: "first gate"}
  - {step: second, type: deterministic_rule, logic: "second gate"}
  - {step: third, type: deterministic_rule, logic: "third gate"}
"""

TWO_RULES = """
metadata: {name: Two Stage}
inputs:
  - {name: amount, type: real}
logic_requirements:
  - {step: screen, type: deterministic_rule, logic: "screen"}
  - {step: decide, type: deterministic_rule, logic: "decide"}
"""

BAD_VERDICT_LOGIC = 'IF has_t2d_diagnosis THEN MAYBE "x"\nELSE DENIED "Does not meet criteria"\n'


class TestSelection:
    def test_glp1_selects_validator_with_fallback(self, glp1_spec, libraries):
        template = select_template(glp1_spec, libraries.templates)
        assert template.id == "validator_with_fallback"
        modules = select_modules(template, libraries.modules)
        assert [m.id for m in modules] == ["review_queue_notifier"]

    def test_rule_only_workflow_selects_sync_handler(self, expense_spec, libraries):
        template = select_template(expense_spec, libraries.templates)
        assert template.id == "sync_handler"
        assert select_modules(template, libraries.modules) == []

    def test_ambiguous_shapes_need_override(self, libraries):
        spec = parse_spec(THREE_RULES)
        with pytest.raises(AmbiguousTemplate) as exc_info:
            select_template(spec, libraries.templates)
        assert exc_info.value.details["candidates"] == ["batch_checkpointed", "sync_handler"]

    def test_override_resolves_ambiguity(self, libraries):
        override = "{name: T, template: batch_checkpointed}"
        spec = parse_spec(THREE_RULES.replace("{name: Three Stage}", override))
        assert select_template(spec, libraries.templates).id == "batch_checkpointed"

    def test_unknown_override(self, libraries):
        spec = parse_spec(EXPENSE_SPEC.replace('  compliance: ["SOX"]', '  template: nowhere'))
        with pytest.raises(NoCompatibleTemplate):
            select_template(spec, libraries.templates)

    def test_incompatible_override(self, libraries):
        spec = parse_spec(
            EXPENSE_SPEC.replace('  compliance: ["SOX"]', "  template: validator_with_fallback")
        )
        with pytest.raises(NoCompatibleTemplate, match="does not accept"):
            select_template(spec, libraries.templates)

    def test_empty_library(self, glp1_spec):
        with pytest.raises(NoCompatibleTemplate):
            select_template(glp1_spec, [])

    def test_missing_capability(self, glp1_spec, libraries):
        template = select_template(glp1_spec, libraries.templates)
        with pytest.raises(MissingCapability):
            select_modules(template, [])


class TestAssembly:
    def test_prompt_sections_in_order(self, glp1_spec, libraries):
        template = select_template(glp1_spec, libraries.templates)
        modules = select_modules(template, libraries.modules)
        prompt = assemble_prompt(glp1_spec, template, modules, libraries.prompt_blocks)

        assert prompt.labels == tuple(label for label, _ in PROMPT_SECTIONS)
        assert prompt.fixture_key == GLP1_WORKFLOW_ID
        assert "bmi" in prompt.section("schema")

    def test_prompt_is_deterministic(self, glp1_spec, libraries):
        template = select_template(glp1_spec, libraries.templates)
        first = assemble_prompt(glp1_spec, template, [], libraries.prompt_blocks)
        second = assemble_prompt(glp1_spec, template, [], libraries.prompt_blocks)
        assert first.digest == second.digest

    def test_unknown_compliance_tag(self, libraries):
        spec = parse_spec(EXPENSE_SPEC.replace('["SOX"]', '["NOT_A_REGIME"]'))
        template = select_template(spec, libraries.templates)
        with pytest.raises(UnknownComplianceTag):
            assemble_prompt(spec, template, [], libraries.prompt_blocks)

    def test_single_rule_step_needs_no_header(self, glp1_spec):
        assert split_generated_logic(GLP1_LOGIC, glp1_spec) == {
            "evaluate_coverage": GLP1_LOGIC.strip()
        }

    def test_step_headers_split_chains(self):
        spec = parse_spec(TWO_RULES)
        text = "STEP screen\nELSE APPROVED\n\nSTEP decide:\nELSE DENIED\n"
        assert split_generated_logic(text, spec) == {
            "screen": "ELSE APPROVED",
            "decide": "ELSE DENIED",
        }

    @pytest.mark.parametrize(
        "text",
        [
            "ELSE APPROVED",  # two rule steps, no headers
            "STEP screen\nELSE APPROVED",  # decide missing
            "STEP screen\nELSE APPROVED\nSTEP screen\nELSE DENIED",
            "STEP other\nELSE APPROVED",
            "stray\nSTEP screen\nELSE APPROVED\nSTEP decide\nELSE DENIED",
        ],
    )
    def test_slot_mismatches(self, text):
        with pytest.raises(SlotMismatch):
            split_generated_logic(text, parse_spec(TWO_RULES))

    def test_header_for_bounded_step(self, glp1_spec):
        with pytest.raises(SlotMismatch, match="bounded"):
            split_generated_logic("STEP extract_clinical_factors\nELSE APPROVED", glp1_spec)

    def test_artifact_serialization_is_byte_identical(self, glp1_spec, libraries):
        template = select_template(glp1_spec, libraries.templates)
        modules = select_modules(template, libraries.modules)
        first = assemble_artifact(template, modules, GLP1_LOGIC, glp1_spec).sealed()
        second = assemble_artifact(template, modules, GLP1_LOGIC, glp1_spec).sealed()
        assert first.serialize() == second.serialize()
        assert first.verify_provenance()

    def test_artifact_round_trip(self, glp1_artifact):
        restored = CompiledArtifact.from_dict(json.loads(glp1_artifact.serialize()))
        assert restored.serialize() == glp1_artifact.serialize()
        assert restored.content_digest() == glp1_artifact.validation_digest

    def test_aliases_recorded_on_artifact(self, glp1_spec, libraries):
        template = select_template(glp1_spec, libraries.templates)
        logic = glp1_spec.step("evaluate_coverage").logic
        artifact = assemble_artifact(template, [], logic, glp1_spec)
        assert dict(artifact.aliases) == {"APPROVE": "APPROVED", "DENY": "DENIED"}
        assert "APPROVE " not in artifact.steps[1].logic


class TestCompileWorkflow:
    def test_glp1_compiles_first_time(self, glp1_spec, glp1_golden, generation_client):
        ledger = TokenLedger()
        result = compile_workflow(glp1_spec, generation_client, glp1_golden, ledger=ledger)

        assert result.report.passed
        assert result.regeneration_count == 0
        assert result.first_pass.overall_first_pass
        assert result.report.stage(ValidationStage.ACCURACY).accuracy == 1.0
        assert result.artifact.validation_digest == result.artifact.content_digest()
        assert generation_client.call_count == 1
        assert ledger.gen_tokens_compiled > 0

    def test_compile_is_reproducible(self, glp1_spec, glp1_golden):
        artifacts = [
            compile_workflow(
                glp1_spec,
                FixtureGenerator({GLP1_WORKFLOW_ID: GLP1_LOGIC}),
                glp1_golden,
            ).artifact
            for _ in range(2)
        ]
        assert artifacts[0].serialize() == artifacts[1].serialize()

    def test_regenerates_with_error_context(self, glp1_spec, glp1_golden):
        client = ScriptedGenerator([BAD_VERDICT_LOGIC, GLP1_LOGIC])
        result = compile_workflow(glp1_spec, client, glp1_golden)

        assert result.regeneration_count == 1
        assert [a.report.failed_stage for a in result.attempts] == [ValidationStage.SYNTAX, None]
        assert "error_context_1" not in client.prompts[0].labels
        assert "error_context_1" in client.prompts[1].labels
        assert "UnknownVerdict" in client.prompts[1].section("error_context_1")
        assert result.first_pass.stages[ValidationStage.SYNTAX] is False
        assert not result.first_pass.overall_first_pass

    def test_budget_exhausted(self, glp1_spec, glp1_golden):
        client = ScriptedGenerator([BAD_VERDICT_LOGIC])
        with pytest.raises(CompilationFailed) as exc_info:
            compile_workflow(glp1_spec, client, glp1_golden, policy=CompilePolicy(0))
        assert len(exc_info.value.attempts) == 1
        assert exc_info.value.report.failed_stage == ValidationStage.SYNTAX

    def test_security_failure_stops_before_syntax(self, glp1_spec, glp1_golden):
        client = ScriptedGenerator(["IF eval(payload) THEN APPROVED ELSE DENIED"])
        with pytest.raises(CompilationFailed) as exc_info:
            compile_workflow(glp1_spec, client, glp1_golden, policy=CompilePolicy(0))
        report = exc_info.value.report
        assert report.failed_stage == ValidationStage.SECURITY
        assert report.stage(ValidationStage.SYNTAX) is None

    def test_slot_mismatch_is_a_syntax_failure(self, glp1_spec, glp1_golden):
        client = ScriptedGenerator(["STEP nowhere\nELSE APPROVED"])
        with pytest.raises(CompilationFailed) as exc_info:
            compile_workflow(glp1_spec, client, glp1_golden, policy=CompilePolicy(0))
        assert exc_info.value.report.stage(ValidationStage.SYNTAX).finding_ids() == ["SlotMismatch"]

    def test_quarantined_client_rejected(self, glp1_spec, glp1_golden):
        client = FixtureGenerator({GLP1_WORKFLOW_ID: GLP1_LOGIC}, role=ClientRole.QUARANTINED)
        with pytest.raises(RoleViolation):
            compile_workflow(glp1_spec, client, glp1_golden)
        assert client.call_count == 0

    def test_empty_golden_set(self, glp1_spec, generation_client):
        with pytest.raises(ValidatorError):
            compile_workflow(glp1_spec, generation_client, [])

    def test_all_stages_disabled(self, glp1_spec, glp1_golden, generation_client):
        pipeline = PipelineConfig(disabled_stages=frozenset(ValidationStage))
        with pytest.raises(ValidatorError):
            compile_workflow(glp1_spec, generation_client, glp1_golden, pipeline=pipeline)

    def test_invalid_spec(self, glp1_golden, generation_client):
        spec = parse_spec("metadata: {name: Empty}\nlogic_requirements: []\n")
        with pytest.raises(SpecError):
            compile_workflow(spec, generation_client, glp1_golden)

    def test_negative_budget(self):
        with pytest.raises(ValueError):
            CompilePolicy(-1)


class TestCodeFoundry:
    def test_compile_with_shipped_fixtures(self, glp1_spec):
        """Default config compiles offline from the shipped generation fixtures"""
        foundry = CodeFoundry(GlobalConfig())
        result = foundry.compile(glp1_spec)
        assert result.report.passed
        assert foundry.ledger.gen_tokens_compiled == 9600

    def test_golden_for_unknown_workflow(self):
        with pytest.raises(ValidatorError):
            CodeFoundry(GlobalConfig()).golden_for("no_such_workflow")

    def test_golden_dir_override(self, tmp_path, glp1_golden):
        path = tmp_path / f"{GLP1_WORKFLOW_ID}.jsonl"
        path.write_text(json.dumps(glp1_golden[0].to_dict()) + "\n")
        config = GlobalConfig()
        config.compile.golden_dir = str(tmp_path)
        assert len(CodeFoundry(config).golden_for(GLP1_WORKFLOW_ID)) == 1

    def test_executor_gets_quarantined_client(self, glp1_artifact):
        executor = CodeFoundry(GlobalConfig()).executor(glp1_artifact)
        assert executor.client.role == ClientRole.QUARANTINED
