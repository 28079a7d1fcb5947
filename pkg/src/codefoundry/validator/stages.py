#!/usr/bin/env python3
"""
CodeFoundry - Validation Stages
Security, Syntax, Execution and Accuracy checks over a compiled artifact,
and the short-circuiting pipeline that runs them in order.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

from ..artifact import CompiledArtifact
from ..errors import FoundryError, RuleError, ValidatorError
from ..executor import AuditLog, WorkflowExecutor, check_sandwich
from ..generators import FaultGenerator, FaultKind, FixtureGenerator
from ..ruledsl import ESCALATION_CODE, parse_expr, typecheck
from ..secgates import CodeText, GateAction, GatePolicy, RuleSet, code_gate_scan
from .report import (
    STAGE_ORDER,
    Finding,
    GoldenCase,
    StageOutcome,
    StageReport,
    ValidationReport,
    ValidationStage,
)

LOG = logging.getLogger("CodeFoundry.validator")

DEFAULT_ACCURACY_THRESHOLD = 0.95


@dataclass(frozen=True)
class PipelineConfig:
    accuracy_threshold: float = DEFAULT_ACCURACY_THRESHOLD
    # ablation: listed stages are reported as SKIPPED
    disabled_stages: FrozenSet[ValidationStage] = frozenset()
    policy: GatePolicy = field(default_factory=GatePolicy)
    rules: Optional[RuleSet] = None
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.accuracy_threshold <= 1:
            raise ValueError("accuracy_threshold must be in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        object.__setattr__(
            self, "disabled_stages", frozenset(ValidationStage(s) for s in self.disabled_stages)
        )


def _report(
    stage: ValidationStage,
    findings: List[Finding],
    started: float,
    failed: bool,
    accuracy: Optional[float] = None,
) -> StageReport:
    outcome = StageOutcome.FAIL if failed else StageOutcome.PASS
    report = StageReport(
        stage=stage,
        outcome=outcome,
        findings=findings,
        duration=time.perf_counter() - started,
        accuracy=accuracy,
    )
    LOG.debug(f"{stage.value} stage: {outcome.value} ({len(findings)} findings)")
    return report


def _error_finding(error: FoundryError, location: Optional[str] = None) -> Finding:
    span = None
    line = getattr(error, "line", None)
    if line is not None:
        span = f"line {line} column {getattr(error, 'column', None)}"
    return Finding(
        id=type(error).__name__,
        severity="high",
        message=error.message,
        span=span,
        location=location,
    )


# ---------------------------------------------------------------------------
# Security
# ---------------------------------------------------------------------------


def run_security(
    artifact: CompiledArtifact, policy: Optional[GatePolicy] = None, rules: Optional[RuleSet] = None
) -> StageReport:
    """Code gate over generated logic and module parameters; blocking findings fail"""
    return scan_code_texts(artifact.scan_texts(), policy, rules)


def scan_code_texts(
    texts: Sequence[CodeText], policy: Optional[GatePolicy] = None, rules: Optional[RuleSet] = None
) -> StageReport:
    started = time.perf_counter()
    gate_findings = code_gate_scan(list(texts), policy, rules)
    findings = [
        Finding(
            id=f.rule_id,
            severity=f.severity.value,
            message=f"{f.category} finding" + (f" ({f.cwe_tag})" if f.cwe_tag else ""),
            span=f"{f.span[0]}-{f.span[1]}",
            location=f.location,
        )
        for f in gate_findings
    ]
    failed = any(f.action == GateAction.BLOCK for f in gate_findings)
    return _report(ValidationStage.SECURITY, findings, started, failed)


# ---------------------------------------------------------------------------
# Syntax
# ---------------------------------------------------------------------------


def run_syntax(artifact: CompiledArtifact) -> StageReport:
    """Every chain and validation parses and typechecks against the field scope"""
    started = time.perf_counter()
    findings: List[Finding] = []
    scope = artifact.field_scope()
    try:
        verdicts = artifact.verdict_set()
    except ValueError as e:
        findings.append(Finding(id="invalid_verdict_set", severity="high", message=str(e)))
        return _report(ValidationStage.SYNTAX, findings, started, True)

    aliases = dict(artifact.aliases)
    rule_steps = [step for step in artifact.steps if not step.is_bounded]
    if not rule_steps:
        findings.append(
            Finding(id="no_decision_step", severity="high", message="artifact has no rule step")
        )

    for step in artifact.steps:
        location = f"step:{step.name}"
        if step.is_bounded:
            if step.schema is None or len(step.schema) == 0:
                findings.append(
                    Finding(
                        id="missing_schema",
                        severity="high",
                        message=f"bounded step {step.name} has no schema",
                        location=location,
                    )
                )
            for index, validation in enumerate(step.validations):
                try:
                    expr = parse_expr(validation.expression)
                except RuleError as e:
                    findings.append(_error_finding(e, f"{location}.validation[{index}]"))
                    continue
                findings.extend(
                    Finding(
                        id=d.code,
                        severity="high",
                        message=d.message,
                        span=d.span,
                        location=f"{location}.validation[{index}]",
                    )
                    for d in typecheck(expr, scope)
                )
            continue

        try:
            chain = step.chain(verdicts)
        except RuleError as e:
            findings.append(_error_finding(e, location))
            continue
        findings.extend(
            Finding(id=d.code, severity="high", message=d.message, span=d.span, location=location)
            for d in typecheck(chain, scope)
        )
        aliases.update(chain.aliases)

    findings.extend(
        Finding(id="verdict_alias", severity="low", message=f"alias {alias} used for {target}")
        for alias, target in sorted(aliases.items())
    )
    failed = any(finding.severity != "low" for finding in findings)
    return _report(ValidationStage.SYNTAX, findings, started, failed)


# ---------------------------------------------------------------------------
# Execution and accuracy
# ---------------------------------------------------------------------------


def _executor(
    artifact: CompiledArtifact, client, config: PipelineConfig
) -> WorkflowExecutor:
    return WorkflowExecutor(
        artifact,
        client,
        config.policy,
        audit_log=AuditLog(),
        rules=config.rules,
        allow_unsealed=True,
    )


def _run_case(
    artifact: CompiledArtifact, case: GoldenCase, config: PipelineConfig
) -> Tuple[Optional[Tuple[str, str]], List[Finding]]:
    """Run one case; returns (status, reason) or None plus structural findings"""
    location = f"case:{case.case_id}" if case.case_id else None
    client = FixtureGenerator.for_extractions(case.mocked_extractions or {})
    findings: List[Finding] = []
    try:
        executor = _executor(artifact, client, config)
        outcome = executor.run(case.inputs)
    except FoundryError as e:
        return None, [_error_finding(e, location)]
    except ValueError as e:
        return None, [
            Finding(id="execution_error", severity="high", message=str(e), location=location)
        ]

    if outcome.status not in artifact.verdict_set():
        findings.append(
            Finding(
                id="undeclared_verdict",
                severity="high",
                message=f"outcome {outcome.status} is not a declared verdict",
                location=location,
            )
        )
    events = executor.audit_log.events(outcome.instance_id)
    for problem in check_sandwich(events):
        findings.append(
            Finding(id="audit_order", severity="high", message=problem, location=location)
        )
    if not any(e.payload.get("logic_version") == artifact.logic_version for e in events):
        findings.append(
            Finding(
                id="audit_version",
                severity="high",
                message="no audit event carries the logic version",
                location=location,
            )
        )
    if not any(step.is_bounded for step in artifact.steps) and client.call_count:
        findings.append(
            Finding(
                id="unexpected_invocation",
                severity="high",
                message=f"rule-only artifact made {client.call_count} client calls",
                location=location,
            )
        )
    return (outcome.status, outcome.reason_code), findings


def _check_escalation_path(
    artifact: CompiledArtifact, case: GoldenCase, config: PipelineConfig
) -> List[Finding]:
    """A client that always fails must end in HUMAN_REVIEW after the retry budget"""
    base = FixtureGenerator.for_extractions(case.mocked_extractions or {})
    client = FaultGenerator(base, FaultKind.TRANSPORT_ERROR)
    try:
        outcome = _executor(artifact, client, config).run(case.inputs)
    except FoundryError as e:
        return [_error_finding(e, "case:client-failure")]
    if outcome.status != ESCALATION_CODE or not outcome.escalated:
        return [
            Finding(
                id="escalation_path",
                severity="high",
                message=f"failing client produced {outcome.status} instead of {ESCALATION_CODE}",
                location="case:client-failure",
            )
        ]
    if client.call_count != artifact.maximum_attempts:
        return [
            Finding(
                id="retry_budget",
                severity="high",
                message=(
                    f"failing client was called {client.call_count} times, "
                    f"budget is {artifact.maximum_attempts}"
                ),
                location="case:client-failure",
            )
        ]
    return []


def run_execution(
    artifact: CompiledArtifact,
    fixtures: Sequence[GoldenCase],
    config: Optional[PipelineConfig] = None,
) -> StageReport:
    """All fixtures complete (any verdict) and the failure path escalates"""
    if not fixtures:
        raise ValidatorError("execution stage needs at least one fixture")
    config = config or PipelineConfig()
    started = time.perf_counter()
    findings: List[Finding] = []
    for case in fixtures:
        _, case_findings = _run_case(artifact, case, config)
        findings.extend(case_findings)
    if any(step.is_bounded for step in artifact.steps) and not findings:
        findings.extend(_check_escalation_path(artifact, fixtures[0], config))
    return _report(ValidationStage.EXECUTION, findings, started, bool(findings))


def run_accuracy(
    artifact: CompiledArtifact,
    golden: Sequence[GoldenCase],
    threshold: float = DEFAULT_ACCURACY_THRESHOLD,
    config: Optional[PipelineConfig] = None,
) -> StageReport:
    """accuracy = matching verdicts / cases; PASS iff accuracy >= threshold"""
    if not golden:
        raise ValidatorError("accuracy stage needs at least one golden case")
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    config = config or PipelineConfig()
    started = time.perf_counter()

    def judge(case: GoldenCase) -> Optional[Finding]:
        result, _ = _run_case(artifact, case, config)
        if result is not None and case.matches(*result):
            return None
        got = "error" if result is None else f"{result[0]} ({result[1]})"
        return Finding(
            id="golden_mismatch",
            severity="medium",
            message=f"expected {case.expected_verdict}, got {got}",
            location=f"case:{case.case_id}" if case.case_id else None,
        )

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            verdicts = list(pool.map(judge, golden))
    else:
        verdicts = [judge(case) for case in golden]
    findings = [finding for finding in verdicts if finding is not None]
    accuracy = (len(golden) - len(findings)) / len(golden)
    return _report(
        ValidationStage.ACCURACY, findings, started, accuracy < threshold, accuracy=accuracy
    )


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def run_pipeline(
    artifact: CompiledArtifact,
    fixtures: Sequence[GoldenCase],
    golden: Sequence[GoldenCase],
    config: Optional[PipelineConfig] = None,
) -> ValidationReport:
    """Run stages in order, stopping at the first FAIL"""
    config = config or PipelineConfig()
    reports: List[StageReport] = []
    for stage in STAGE_ORDER:
        if stage in config.disabled_stages:
            reports.append(StageReport(stage=stage, outcome=StageOutcome.SKIPPED))
            continue
        if stage == ValidationStage.SECURITY:
            report = run_security(artifact, config.policy, config.rules)
        elif stage == ValidationStage.SYNTAX:
            report = run_syntax(artifact)
        elif stage == ValidationStage.EXECUTION:
            report = run_execution(artifact, fixtures, config)
        else:
            report = run_accuracy(artifact, golden, config.accuracy_threshold, config)
        reports.append(report)
        if report.failed:
            LOG.info(f"Validation of {artifact.workflow_id} failed at {stage.value}")
            break
    return ValidationReport(stages=reports, artifact_digest=artifact.content_digest())
