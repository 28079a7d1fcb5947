#!/usr/bin/env python3
"""
CodeFoundry - Compiler
The validate/regenerate loop around one-time generation, and the
CodeFoundry orchestrator that wires configuration, libraries and clients.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import yaml

from ..artifact import CompiledArtifact
from ..config import ClientConfig, GlobalConfig
from ..errors import CompilationFailed, LibraryError, SlotMismatch, SpecError, ValidatorError
from ..executor import AuditLog, AuditStore, DriftMonitor, RetryPolicy, WorkflowExecutor
from ..generators import (
    ClientRole,
    FaultGenerator,
    FixtureGenerator,
    GeneratorClient,
    HttpGenerator,
    ScriptedGenerator,
    get_generator_class,
)
from ..library import Libraries, default_libraries, load_libraries
from ..metrics import TokenLedger
from ..prompts import AssembledPrompt, PromptRenderer, default_renderer
from ..resources import get_data_path
from ..secgates import CodeText, GatePolicy, RuleSet, load_rules
from ..specmodel import WorkflowSpec, load_spec, validate_spec
from ..validator import (
    STAGE_ORDER,
    Finding,
    FirstPassRecord,
    GoldenCase,
    PipelineConfig,
    StageOutcome,
    StageReport,
    ValidationReport,
    ValidationStage,
    load_golden,
    run_pipeline,
    scan_code_texts,
)
from .assembly import assemble_artifact, assemble_prompt, generate_logic, split_generated_logic
from .selection import select_modules, select_template

LOG = logging.getLogger("CodeFoundry.foundry")

DEFAULT_MAX_REGENERATIONS = 3


@dataclass(frozen=True)
class CompilePolicy:
    max_regenerations: int = DEFAULT_MAX_REGENERATIONS

    def __post_init__(self):
        if self.max_regenerations < 0:
            raise ValueError("max_regenerations must be >= 0")


@dataclass(frozen=True)
class CompileAttempt:
    number: int
    prompt_digest: str
    report: ValidationReport
    input_tokens: int = 0
    output_tokens: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "attempt": self.number,
            "prompt_digest": self.prompt_digest,
            "failed_stage": self.report.failed_stage.value if self.report.failed_stage else None,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "report": self.report.to_dict(),
        }


@dataclass(frozen=True)
class CompileResult:
    artifact: CompiledArtifact
    report: ValidationReport
    first_pass: FirstPassRecord
    attempts: Sequence[CompileAttempt] = field(default_factory=tuple)

    @property
    def regeneration_count(self) -> int:
        return self.artifact.provenance.regeneration_count

    def to_dict(self) -> Dict[str, Any]:
        return {
            "workflow_id": self.artifact.workflow_id,
            "validation_digest": self.artifact.validation_digest,
            "regeneration_count": self.regeneration_count,
            "first_pass": self.first_pass.to_dict(),
            "report": self.report.to_dict(),
            "attempts": [attempt.to_dict() for attempt in self.attempts],
        }


def _slot_mismatch_report(
    text: str, error: SlotMismatch, config: PipelineConfig
) -> ValidationReport:
    """Security over the raw generation, then a Syntax failure for the slot error"""
    reports: List[StageReport] = []
    if ValidationStage.SECURITY in config.disabled_stages:
        reports.append(StageReport(ValidationStage.SECURITY, StageOutcome.SKIPPED))
    else:
        security = scan_code_texts([CodeText("generation", text)], config.policy, config.rules)
        reports.append(security)
        if security.failed:
            return ValidationReport(stages=reports)
    finding = Finding(id="SlotMismatch", severity="high", message=error.message)
    reports.append(StageReport(ValidationStage.SYNTAX, StageOutcome.FAIL, [finding]))
    return ValidationReport(stages=reports)


def _error_context(
    renderer: PromptRenderer, attempt: int, report: ValidationReport
) -> str:
    failed = report.stage(report.failed_stage)
    return renderer.render(
        "error_context.j2",
        attempt=attempt,
        stage=failed.stage.value,
        findings=list(failed.findings),
    )


def compile_workflow(
    spec: WorkflowSpec,
    client: GeneratorClient,
    golden: Sequence[GoldenCase],
    fixtures: Optional[Sequence[GoldenCase]] = None,
    libraries: Optional[Libraries] = None,
    pipeline: Optional[PipelineConfig] = None,
    policy: Optional[CompilePolicy] = None,
    ledger: Optional[TokenLedger] = None,
    renderer: Optional[PromptRenderer] = None,
) -> CompileResult:
    """
    Compile a workflow spec into a sealed artifact.

    Each attempt generates once, assembles, and runs the full validation
    pipeline. A failing attempt appends its error context to the prompt
    and regenerates, up to `policy.max_regenerations` times.

    Raises:
        SpecError: the spec fails cross-field validation
        CompilationFailed: the regeneration budget ran out
    """
    diagnostics = validate_spec(spec)
    if diagnostics:
        raise SpecError(
            f"workflow '{spec.name}' has {len(diagnostics)} problems: {diagnostics[0].message}",
            path=diagnostics[0].path,
            diagnostics=[d.to_dict() for d in diagnostics],
        )
    if not golden:
        raise ValidatorError(f"workflow '{spec.workflow_id}' needs golden cases to compile")
    if pipeline is not None and set(STAGE_ORDER) <= pipeline.disabled_stages:
        raise ValidatorError("compile needs at least one enabled validation stage")

    libraries = libraries or default_libraries()
    pipeline = pipeline or PipelineConfig()
    policy = policy or CompilePolicy()
    renderer = renderer or default_renderer()
    fixtures = list(fixtures) if fixtures else list(golden)

    template = select_template(spec, libraries.templates)
    modules = select_modules(template, libraries.modules)
    prompt: AssembledPrompt = assemble_prompt(
        spec, template, modules, libraries.prompt_blocks, renderer
    )

    first_pass: Dict[ValidationStage, Optional[bool]] = {stage: None for stage in STAGE_ORDER}
    attempts: List[CompileAttempt] = []
    report: Optional[ValidationReport] = None

    for number in range(1, policy.max_regenerations + 2):
        LOG.info(f"Compiling {spec.workflow_id}: attempt {number}")
        generation = generate_logic(client, prompt, ledger)
        artifact = None
        try:
            logic = split_generated_logic(generation.text, spec)
            artifact = assemble_artifact(
                template, modules, logic, spec, prompt, generation, regeneration_count=number - 1
            )
            report = run_pipeline(artifact, fixtures, golden, pipeline)
        except SlotMismatch as e:
            report = _slot_mismatch_report(generation.text, e, pipeline)

        for stage_report in report.stages:
            reached = stage_report.outcome != StageOutcome.SKIPPED
            if reached and first_pass[stage_report.stage] is None:
                first_pass[stage_report.stage] = stage_report.passed
        attempts.append(
            CompileAttempt(
                number=number,
                prompt_digest=prompt.digest,
                report=report,
                input_tokens=generation.input_tokens,
                output_tokens=generation.output_tokens,
            )
        )

        if report.passed and artifact is not None:
            sealed = artifact.sealed()
            LOG.info(
                f"Compiled {spec.workflow_id} after {number} attempt(s); "
                f"digest {sealed.validation_digest[:12]}"
            )
            return CompileResult(
                artifact=sealed,
                report=report,
                first_pass=FirstPassRecord(stages=first_pass, label=spec.workflow_id),
                attempts=tuple(attempts),
            )

        LOG.info(f"Attempt {number} for {spec.workflow_id} failed at {report.failed_stage.value}")
        context = _error_context(renderer, number, report)
        prompt = prompt.with_section(f"error_context_{number}", context)

    raise CompilationFailed(
        f"workflow '{spec.workflow_id}' failed validation after {len(attempts)} attempts",
        report=report,
        attempts=attempts,
    )


# ---------------------------------------------------------------------------
# Orchestrator
# ---------------------------------------------------------------------------


def _load_script(path: Union[str, Path]) -> List[str]:
    try:
        document = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise LibraryError(f"Cannot read script file {path}: {e}") from None
    responses = document.get("responses") if isinstance(document, dict) else None
    if not isinstance(responses, list) or not all(isinstance(r, str) for r in responses):
        raise LibraryError(f"{path}: 'responses' must be a list of strings")
    return responses


def build_client(
    config: ClientConfig, role: ClientRole = ClientRole.PRIVILEGED
) -> GeneratorClient:
    """Generator client for `config.mode`"""
    client_class = get_generator_class(config.mode)
    if client_class is HttpGenerator:
        return HttpGenerator(
            endpoint=config.endpoint,
            api_key=config.api_key or None,
            model=config.model,
            role=role,
            timeout=config.timeout,
            verify_ssl=config.verify_ssl,
            ca_bundle_path=config.ca_bundle_path,
        )
    if client_class is ScriptedGenerator:
        if not config.script_path:
            raise LibraryError("scripted client mode needs client.script_path")
        return ScriptedGenerator(_load_script(config.script_path), role=role)

    fixtures_path = config.fixtures_path or get_data_path("fixtures", "generation_fixtures.yaml")
    fixture_client = FixtureGenerator.from_file(fixtures_path, role=role)
    if client_class is FaultGenerator:
        return FaultGenerator(fixture_client, config.fault_kind, config.faulty_calls)
    return fixture_client


class CodeFoundry:
    """Compile, validate and run workflows with one configuration"""

    def __init__(
        self,
        config: Optional[GlobalConfig] = None,
        libraries: Optional[Libraries] = None,
        client: Optional[GeneratorClient] = None,
        ledger: Optional[TokenLedger] = None,
    ):
        self.config = config or GlobalConfig()
        if libraries is None:
            path = self.config.compile.libraries_path
            libraries = load_libraries(path) if path else default_libraries()
        self.libraries = libraries
        self._client = client
        self.ledger = ledger or TokenLedger()
        self._rules: Optional[RuleSet] = None

    @property
    def client(self) -> GeneratorClient:
        if self._client is None:
            self._client = build_client(self.config.client)
        return self._client

    @property
    def rules(self) -> RuleSet:
        if self._rules is None:
            self._rules = load_rules(self.config.gates.rules_path)
        return self._rules

    def gate_policy(self) -> GatePolicy:
        return self.config.gates.to_policy()

    def pipeline_config(self) -> PipelineConfig:
        validation = self.config.validation
        return PipelineConfig(
            accuracy_threshold=validation.accuracy_threshold,
            disabled_stages=frozenset(validation.disabled_stages),
            policy=self.gate_policy(),
            rules=self.rules,
            workers=validation.workers,
        )

    def golden_for(self, workflow_id: str) -> List[GoldenCase]:
        """Golden set from compile.golden_dir, else the shipped one"""
        directory = self.config.compile.golden_dir
        path = Path(directory) / f"{workflow_id}.jsonl" if directory else None
        if path is None or not path.exists():
            try:
                path = get_data_path("golden", f"{workflow_id}.jsonl")
            except FileNotFoundError:
                raise ValidatorError(f"no golden set found for '{workflow_id}'") from None
        return load_golden(path)

    def compile(
        self,
        spec: WorkflowSpec,
        golden: Optional[Sequence[GoldenCase]] = None,
        fixtures: Optional[Sequence[GoldenCase]] = None,
    ) -> CompileResult:
        return compile_workflow(
            spec,
            self.client,
            golden if golden is not None else self.golden_for(spec.workflow_id),
            fixtures=fixtures,
            libraries=self.libraries,
            pipeline=self.pipeline_config(),
            policy=CompilePolicy(self.config.compile.max_regenerations),
            ledger=self.ledger,
        )

    def compile_file(
        self, spec_path: Union[str, Path], golden_path: Optional[Union[str, Path]] = None
    ) -> CompileResult:
        spec = load_spec(spec_path)
        golden = load_golden(golden_path) if golden_path else None
        return self.compile(spec, golden)

    def validate(
        self,
        artifact: CompiledArtifact,
        golden: Sequence[GoldenCase],
        fixtures: Optional[Sequence[GoldenCase]] = None,
    ) -> ValidationReport:
        return run_pipeline(artifact, fixtures or golden, golden, self.pipeline_config())

    def executor(
        self,
        artifact: CompiledArtifact,
        client: Optional[GeneratorClient] = None,
        audit_log: Optional[AuditLog] = None,
        drift: Optional[DriftMonitor] = None,
    ) -> WorkflowExecutor:
        """Executor wired to the configured gates, retry budget and audit store"""
        runtime = self.config.runtime
        if audit_log is None:
            store = AuditStore(runtime.audit_database_path) if runtime.audit_database_path else None
            audit_log = AuditLog(store)
        if client is None and any(step.is_bounded for step in artifact.steps):
            client = build_client(self.config.client, role=ClientRole.QUARANTINED)
        return WorkflowExecutor(
            artifact,
            client,
            self.gate_policy(),
            retry=RetryPolicy(runtime.maximum_attempts),
            audit_log=audit_log,
            drift=drift or DriftMonitor(runtime.drift_window, runtime.drift_threshold),
            ledger=self.ledger,
            rules=self.rules,
            scaffold_fragments=self.libraries.scaffold_fragments(),
        )
