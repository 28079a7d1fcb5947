#!/usr/bin/env python3
"""
CodeFoundry - Workflow Runtime
Executes a compiled artifact instance by instance:

  1. bounded invocation   quarantined extraction with retries
  2. validation           schema check plus validation expressions
  3. decision             rule chains, no model calls
  4. audit trail          every phase appends to the audit log

Input text passes the input gate before it reaches a client; every raw
response and the final outcome pass the output gate.
"""

import json
import logging
import uuid
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from ..artifact import CompiledArtifact, CompiledStep
from ..digests import canonical_json, digest_of
from ..errors import (
    ArtifactDigestMismatch,
    GeneratorError,
    InputTypeMismatch,
    ReplayDivergence,
    RoleViolation,
    SequenceGap,
)
from ..generators import ClientRole, GeneratorClient
from ..metrics import COMPILED, TokenLedger
from ..prompts import (
    JSON_OUTPUT_GRAMMAR,
    AssembledPrompt,
    PromptRenderer,
    default_renderer,
    metadata,
    render_sections,
)
from ..ruledsl import (
    ESCALATION_CODE,
    EvalContext,
    Expr,
    NullPolicy,
    RuleChain,
    Verdict,
    evaluate_chain,
    evaluate_validation,
    parse_expr,
    referenced_fields,
)
from ..secgates import (
    GateAction,
    GatePolicy,
    InputScanResult,
    InstanceGateState,
    RuleSet,
    default_rules,
    input_gate_scan,
    mint_canary,
    output_gate_scan,
)
from ..specmodel import FieldKind, SchemaDecl
from .audit import AuditEvent, AuditEventKind, AuditLog, wall_clock_now
from .drift import DriftMonitor

LOG = logging.getLogger("CodeFoundry.executor")

INPUT_GATE_REASON = "input gate blocked"
OUTPUT_GATE_REASON = "output gate blocked"
CANARY_LEAK_REASON = "canary leak"


@dataclass(frozen=True)
class RetryPolicy:
    maximum_attempts: int = 3

    def __post_init__(self):
        if self.maximum_attempts < 1:
            raise ValueError("maximum_attempts must be at least 1")


@dataclass(frozen=True)
class StepOutcome:
    status: str
    reason_code: str
    escalated: bool = False
    logic_version: str = ""
    input_digest: str = ""
    instance_id: str = field(default="", compare=False)

    def __post_init__(self):
        if self.escalated and self.status != ESCALATION_CODE:
            raise ValueError(f"escalated outcomes must be {ESCALATION_CODE}")

    def record(self) -> Dict[str, Any]:
        """Instance-independent fields; two runs on the same inputs give the same record"""
        return {
            "status": self.status,
            "reason_code": self.reason_code,
            "escalated": self.escalated,
            "logic_version": self.logic_version,
            "input_digest": self.input_digest,
        }

    @property
    def output_digest(self) -> str:
        return digest_of(self.record())

    def to_dict(self) -> Dict[str, Any]:
        payload = self.record()
        payload["output_digest"] = self.output_digest
        payload["instance_id"] = self.instance_id
        return payload

    def to_line(self) -> str:
        payload = self.record()
        payload["output_digest"] = self.output_digest
        return canonical_json(payload)


@dataclass
class WorkflowInstance:
    instance_id: str
    artifact_digest: str
    inputs: Mapping[str, Any]
    gate_state: InstanceGateState
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    extracted: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    clock: int = 0

    def bindings(self) -> Dict[str, Any]:
        values = dict(self.inputs)
        for step_values in self.extracted.values():
            values.update(step_values)
        return values

    def next_event(
        self, kind: AuditEventKind, payload: Mapping[str, Any], step: Optional[str] = None
    ) -> AuditEvent:
        return AuditEvent(
            instance_id=self.instance_id,
            sequence=self.clock + 1,
            kind=kind,
            step=step,
            payload=dict(payload),
            wall_clock=wall_clock_now(),
        )


@dataclass(frozen=True)
class BoundedResult:
    """Accepted values, or the escalation reason when retries ran out"""

    values: Optional[Dict[str, Any]]
    attempts: int
    reason: Optional[str] = None

    @property
    def escalated(self) -> bool:
        return self.values is None


class ExtractionRejected(Exception):
    """Quarantined response rejected by the schema check, a validation or a gate"""

    def __init__(self, reason: str, values: Optional[Dict[str, Any]] = None):
        super().__init__(reason)
        self.reason = reason
        self.values = values


class _SafeFormat(dict):
    def __missing__(self, key: str) -> str:
        return "{" + key + "}"


# ---------------------------------------------------------------------------
# Value checks
# ---------------------------------------------------------------------------


def _conforms(value: Any, kind: FieldKind) -> bool:
    if kind in (FieldKind.TEXT, FieldKind.STRING):
        return isinstance(value, str)
    if kind == FieldKind.BOOLEAN:
        return isinstance(value, bool)
    if kind == FieldKind.INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == FieldKind.REAL:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return False


def check_inputs(artifact: CompiledArtifact, inputs: Mapping[str, Any]) -> None:
    """
    Raises:
        InputTypeMismatch: missing, undeclared or wrongly typed input
    """
    declared = {decl.name: decl.kind for decl in artifact.inputs}
    missing = sorted(set(declared) - set(inputs))
    extra = sorted(set(inputs) - set(declared))
    if missing:
        raise InputTypeMismatch(f"missing inputs {missing}", fields=missing)
    if extra:
        raise InputTypeMismatch(f"undeclared inputs {extra}", fields=extra)
    for name, kind in declared.items():
        value = inputs[name]
        if value is not None and not _conforms(value, kind):
            raise InputTypeMismatch(
                f"input {name} must be {kind.value}, got {type(value).__name__}", field=name
            )


def parse_extraction(text: str, schema: SchemaDecl) -> Dict[str, Any]:
    """
    Strict parse of a quarantined response: one JSON object with exactly
    the schema keys, each of the declared kind or null when nullable.
    """
    try:
        document = json.loads(text)
    except (json.JSONDecodeError, TypeError):
        raise ExtractionRejected("response is not a JSON object") from None
    if not isinstance(document, dict):
        raise ExtractionRejected("response is not a JSON object")

    extra = sorted(set(document) - set(schema.field_names))
    if extra:
        raise ExtractionRejected(f"unexpected keys {extra}")
    values: Dict[str, Any] = {}
    for name, decl in schema.entries:
        if name not in document:
            raise ExtractionRejected(f"missing key {name}")
        value = document[name]
        if value is None:
            if not decl.nullable:
                raise ExtractionRejected(f"{name} must not be null")
        elif not _conforms(value, decl.kind):
            raise ExtractionRejected(f"{name} must be {decl.kind.value}")
        elif decl.kind == FieldKind.REAL:
            value = float(value)
        values[name] = value
    return values


# ---------------------------------------------------------------------------
# Audit helpers
# ---------------------------------------------------------------------------


def append_audit(log: AuditLog, instance: WorkflowInstance, event: AuditEvent) -> AuditEvent:
    """
    Raises:
        SequenceGap: event sequence is not the instance clock + 1
    """
    if event.instance_id != instance.instance_id or event.sequence != instance.clock + 1:
        raise SequenceGap(
            f"instance {instance.instance_id}: expected sequence {instance.clock + 1}, "
            f"got {event.sequence}",
            instance_id=instance.instance_id,
        )
    log.append(event)
    instance.clock = event.sequence
    return event


def check_sandwich(events: Sequence[AuditEvent]) -> List[str]:
    """
    Ordering problems in one instance's events: each validation_result must
    follow an invocation_attempt of the same step, and no decision may be
    taken while an invocation is still unvalidated.
    """
    problems = []
    pending: Dict[Optional[str], int] = {}
    for event in events:
        if event.kind == AuditEventKind.INVOCATION_ATTEMPT:
            pending[event.step] = pending.get(event.step, 0) + 1
        elif event.kind == AuditEventKind.VALIDATION_RESULT:
            if not pending.get(event.step):
                problems.append(f"validation_result at {event.sequence} has no invocation")
            else:
                pending[event.step] -= 1
        elif event.kind == AuditEventKind.DECISION:
            open_steps = sorted(str(step) for step, count in pending.items() if count)
            if open_steps:
                problems.append(
                    f"decision at {event.sequence} precedes validation of {open_steps}"
                )
    return problems


def evaluate_decision_step(chain: RuleChain, bindings: Mapping[str, Any]) -> Verdict:
    """
    Raises:
        UnboundField: the chain references a field absent from the bindings
    """
    return evaluate_chain(chain, EvalContext(bindings, NullPolicy.ESCALATE_DECISION))


# ---------------------------------------------------------------------------
# Executor
# ---------------------------------------------------------------------------


class WorkflowExecutor:
    """
    Runs instances of one artifact. Safe to share between threads: per-run
    state lives in WorkflowInstance; the log, drift monitor and ledger lock
    internally.
    """

    def __init__(
        self,
        artifact: CompiledArtifact,
        client: Optional[GeneratorClient] = None,
        policy: Optional[GatePolicy] = None,
        retry: Optional[RetryPolicy] = None,
        audit_log: Optional[AuditLog] = None,
        drift: Optional[DriftMonitor] = None,
        ledger: Optional[TokenLedger] = None,
        rules: Optional[RuleSet] = None,
        renderer: Optional[PromptRenderer] = None,
        scaffold_fragments: Sequence[str] = (),
        allow_unsealed: bool = False,
    ):
        if client is not None and client.role != ClientRole.QUARANTINED:
            raise RoleViolation("runtime extraction requires a quarantined client")
        self.artifact = artifact
        self.client = client
        self.policy = policy or GatePolicy()
        self.retry = retry or RetryPolicy(artifact.maximum_attempts)
        self.audit_log = audit_log if audit_log is not None else AuditLog()
        self.drift = drift or DriftMonitor()
        self.ledger = ledger
        self.rules = rules or default_rules()
        self.renderer = renderer or default_renderer()
        self.scaffold_fragments = tuple(scaffold_fragments)
        self.allow_unsealed = allow_unsealed

        self.artifact_digest = artifact.content_digest()
        verdicts = artifact.verdict_set()
        self._chains: Dict[str, RuleChain] = {
            step.name: step.chain(verdicts) for step in artifact.steps if not step.is_bounded
        }
        self._validations: Dict[str, Tuple[Tuple[Expr, Optional[str]], ...]] = {
            step.name: tuple((parse_expr(v.expression), v.reason) for v in step.validations)
            for step in artifact.steps
            if step.is_bounded
        }
        self._text_inputs = [d.name for d in artifact.inputs if d.kind == FieldKind.TEXT]

    # -- bookkeeping ---------------------------------------------------------

    def _emit(
        self,
        instance: WorkflowInstance,
        kind: AuditEventKind,
        payload: Mapping[str, Any],
        step: Optional[str] = None,
    ) -> AuditEvent:
        return append_audit(self.audit_log, instance, instance.next_event(kind, payload, step))

    def _emit_findings(
        self, instance: WorkflowInstance, findings, step: Optional[str] = None
    ) -> None:
        for finding in findings:
            self._emit(instance, AuditEventKind.GATE_FINDING, finding.to_dict(), step)

    def _check_digest(self) -> None:
        sealed = self.artifact.validation_digest
        if sealed is None:
            if not self.allow_unsealed:
                raise ArtifactDigestMismatch(
                    f"artifact {self.artifact.workflow_id} carries no validation digest"
                )
        elif sealed != self.artifact_digest:
            raise ArtifactDigestMismatch(
                f"artifact {self.artifact.workflow_id} changed after validation",
                expected=sealed,
                actual=self.artifact_digest,
            )

    def _outcome(
        self, instance: WorkflowInstance, input_digest: str, status: str, reason: str
    ) -> StepOutcome:
        return StepOutcome(
            status=status,
            reason_code=reason,
            escalated=status == ESCALATION_CODE,
            logic_version=self.artifact.logic_version,
            input_digest=input_digest,
            instance_id=instance.instance_id,
        )

    def _escalate(
        self,
        instance: WorkflowInstance,
        input_digest: str,
        reason: str,
        cause: str,
        step: Optional[str] = None,
    ) -> StepOutcome:
        payload: Dict[str, Any] = {
            "status": ESCALATION_CODE,
            "reason": reason,
            "cause": cause,
            "logic_version": self.artifact.logic_version,
            "input_digest": input_digest,
        }
        notifier = self.artifact.module("notifier")
        if notifier is not None and "message_template" in notifier.params:
            payload["notifier"] = notifier.id
            payload["notification"] = notifier.params["message_template"].format_map(
                _SafeFormat(instance_id=instance.instance_id, reason=reason, step=step or "")
            )
        self._emit(instance, AuditEventKind.ESCALATION, payload, step)
        LOG.info(f"Instance {instance.instance_id} escalated ({cause}): {reason}")
        return self._outcome(instance, input_digest, ESCALATION_CODE, reason)

    # -- bounded invocation --------------------------------------------------

    def extraction_prompt(
        self,
        step: CompiledStep,
        scan: Mapping[str, InputScanResult],
        state: InstanceGateState,
        violation: Optional[str] = None,
    ) -> AssembledPrompt:
        """Quarantined prompt: sanitized input, schema, contract and canary only"""
        context = {"step": step, "keys": step.schema.field_names if step.schema else []}
        sections = render_sections(
            self.renderer,
            (("extraction", "extraction.j2"),),
            context,
        )
        input_text = "\n\n".join(
            f"[{name}]\n{scan[name].text}" for name in self._text_inputs if name in scan
        )
        sections += (("input", input_text or "(no text inputs)"),)
        sections += render_sections(
            self.renderer, (("output_contract", "extraction_contract.j2"),), context
        )
        sections += (("instance_marker", state.canary.value),)
        prompt = AssembledPrompt(
            sections=sections,
            metadata=metadata(fixture_key=step.name, output_grammar=JSON_OUTPUT_GRAMMAR),
        )
        if violation is not None:
            prompt = prompt.with_section(
                "violation_feedback",
                self.renderer.render("violation_feedback.j2", violation=violation),
            )
        text = prompt.text
        if any(fragment in text for fragment in self.scaffold_fragments):
            raise RoleViolation(f"scaffold text reached the quarantined prompt for {step.name}")
        return prompt

    def _attempt(
        self,
        instance: WorkflowInstance,
        step: CompiledStep,
        prompt: AssembledPrompt,
        scan: Mapping[str, InputScanResult],
    ) -> Dict[str, Any]:
        """One invocation; raises ExtractionRejected when the response is rejected"""
        if self.client is None:
            raise ExtractionRejected("no quarantined client configured")
        try:
            generation = self.client.generate(prompt)
        except GeneratorError as e:
            raise ExtractionRejected(f"client unavailable: {e.message}") from None
        if self.ledger is not None:
            self.ledger.record_runtime(COMPILED, generation.total_tokens)

        gate = output_gate_scan(
            generation.text,
            instance.gate_state,
            self.policy,
            self.rules,
            location=f"response:{step.name}",
        )
        self._emit_findings(instance, gate.findings, step.name)
        if gate.leaked:
            raise ExtractionRejected(CANARY_LEAK_REASON)
        if gate.blocked:
            raise ExtractionRejected(OUTPUT_GATE_REASON)

        values = parse_extraction(gate.text, step.schema or SchemaDecl())
        for name, value in values.items():
            if isinstance(value, str):
                for result in scan.values():
                    value = result.restore(value)
                values[name] = value

        bindings = instance.bindings()
        bindings.update(values)
        ctx = EvalContext(bindings, NullPolicy.SKIP_VALIDATION)
        for expr, reason in self._validations.get(step.name, ()):
            result = evaluate_validation(expr, ctx, reason)
            if not result.passed:
                raise ExtractionRejected(result.reason or "validation failed", values)
        return values

    def run_bounded_step(
        self,
        instance: WorkflowInstance,
        step: CompiledStep,
        scan: Mapping[str, InputScanResult],
    ) -> BoundedResult:
        """Extract values for one bounded step, retrying with violation feedback"""
        violation: Optional[str] = None
        for attempt in range(1, instance.retry.maximum_attempts + 1):
            prompt = self.extraction_prompt(step, scan, instance.gate_state, violation)
            self._emit(
                instance,
                AuditEventKind.INVOCATION_ATTEMPT,
                {"attempt": attempt, "prompt_digest": prompt.digest},
                step.name,
            )
            try:
                values = self._attempt(instance, step, prompt, scan)
            except ExtractionRejected as v:
                violation = v.reason
                self.drift.record(self.artifact_digest, True)
                payload: Dict[str, Any] = {
                    "attempt": attempt,
                    "status": "fail",
                    "violation": v.reason,
                }
                if v.values is not None:
                    payload["values"] = v.values
                self._emit(instance, AuditEventKind.VALIDATION_RESULT, payload, step.name)
                LOG.debug(f"Step {step.name} attempt {attempt} rejected: {v.reason}")
                if v.reason == CANARY_LEAK_REASON:
                    return BoundedResult(None, attempt, CANARY_LEAK_REASON)
                continue
            self.drift.record(self.artifact_digest, False)
            self._emit(
                instance,
                AuditEventKind.VALIDATION_RESULT,
                {"attempt": attempt, "status": "pass", "values": values},
                step.name,
            )
            return BoundedResult(values, attempt)
        return BoundedResult(None, instance.retry.maximum_attempts, violation)

    # -- instance ------------------------------------------------------------

    def start(
        self, inputs: Mapping[str, Any], instance_id: Optional[str] = None
    ) -> WorkflowInstance:
        instance_id = instance_id or f"{self.artifact.workflow_id}-{uuid.uuid4().hex[:12]}"
        return WorkflowInstance(
            instance_id=instance_id,
            artifact_digest=self.artifact_digest,
            inputs=dict(inputs),
            gate_state=InstanceGateState(instance_id, mint_canary(instance_id)),
            retry=self.retry,
        )

    def run(self, inputs: Mapping[str, Any], instance_id: Optional[str] = None) -> StepOutcome:
        """
        Execute one instance.

        Raises:
            InputTypeMismatch: inputs do not conform to the declarations
            ArtifactDigestMismatch: artifact changed since it was validated
            UnboundField: a rule references a field nothing binds
        """
        check_inputs(self.artifact, inputs)
        self._check_digest()
        instance = self.start(inputs, instance_id)
        input_digest = digest_of(dict(inputs))
        outcome = self._run(instance, input_digest)
        if self.ledger is not None:
            self.ledger.record_transaction(COMPILED)
        return outcome

    def _run(self, instance: WorkflowInstance, input_digest: str) -> StepOutcome:
        scan: Dict[str, InputScanResult] = {}
        for name in self._text_inputs:
            value = instance.inputs.get(name)
            if value is None:
                continue
            result = input_gate_scan(value, self.policy, self.rules, location=f"input:{name}")
            self._emit_findings(instance, result.findings)
            scan[name] = result
        blocked = sorted(
            {f.rule_id for r in scan.values() for f in r.findings if f.action == GateAction.BLOCK}
        )
        if blocked:
            return self._escalate(
                instance, input_digest, f"{INPUT_GATE_REASON}: {', '.join(blocked)}", "input_gate"
            )

        decision: Optional[Verdict] = None
        for step in self.artifact.steps:
            if step.is_bounded:
                result = self.run_bounded_step(instance, step, scan)
                if result.escalated:
                    return self._escalate(
                        instance,
                        input_digest,
                        result.reason or "extraction failed",
                        "bounded_step",
                        step.name,
                    )
                instance.extracted[step.name] = result.values or {}
                continue

            chain = self._chains[step.name]
            bindings = instance.bindings()
            decision = evaluate_decision_step(chain, bindings)
            self._emit(
                instance,
                AuditEventKind.DECISION,
                {
                    "decision": decision.code,
                    "reason": decision.reason,
                    "logic_version": self.artifact.logic_version,
                    "input_digest": input_digest,
                    "bindings": {name: bindings.get(name) for name in referenced_fields(chain)},
                },
                step.name,
            )
            if decision.code == ESCALATION_CODE:
                return self._escalate(
                    instance, input_digest, decision.reason, "decision", step.name
                )

        if decision is None:
            return self._escalate(instance, input_digest, "no decision step", "decision")

        final = output_gate_scan(
            f"{decision.code} {decision.reason}",
            instance.gate_state,
            self.policy,
            self.rules,
            location="outcome",
        )
        if final.blocked:
            self._emit_findings(instance, final.findings)
            return self._escalate(instance, input_digest, OUTPUT_GATE_REASON, "output_gate")
        return self._outcome(instance, input_digest, decision.code, decision.reason)


def run_workflow(
    artifact: CompiledArtifact,
    inputs: Mapping[str, Any],
    client: Optional[GeneratorClient] = None,
    policy: Optional[GatePolicy] = None,
    audit_log: Optional[AuditLog] = None,
    **kwargs: Any,
) -> Tuple[StepOutcome, List[AuditEvent]]:
    """Run one instance; returns the outcome and that instance's audit events"""
    executor = WorkflowExecutor(artifact, client, policy, audit_log=audit_log, **kwargs)
    outcome = executor.run(inputs)
    return outcome, executor.audit_log.events(outcome.instance_id)


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------


def _require_version(artifact: CompiledArtifact, event: AuditEvent) -> None:
    logged = event.payload.get("logic_version")
    if logged != artifact.logic_version:
        raise ReplayDivergence(
            f"event {event.sequence} was logged by logic_version {logged}, "
            f"artifact is {artifact.logic_version}",
            sequence=event.sequence,
        )


def replay(
    artifact: CompiledArtifact, log: AuditLog, instance_id: Optional[str] = None
) -> StepOutcome:
    """
    Re-run the deterministic phases of one logged instance from its
    recorded extraction values, without a client.

    Raises:
        ReplayDivergence: version mismatch, tampered payload or a different result
    """
    if instance_id is None:
        instances = log.instances()
        if len(instances) != 1:
            raise ReplayDivergence(f"log holds {len(instances)} instances; name one to replay")
        instance_id = instances[0]
    events = log.events(instance_id)
    if not events:
        raise ReplayDivergence(f"no events for instance {instance_id}")
    problems = check_sandwich(events)
    if problems:
        raise ReplayDivergence(f"instance {instance_id} log is out of order: {problems[0]}")

    verdicts = artifact.verdict_set()
    chains = {step.name: step.chain(verdicts) for step in artifact.steps if not step.is_bounded}
    accepted: Dict[str, Any] = {}
    terminal: Optional[AuditEvent] = None
    input_digest = ""

    for event in events:
        if event.kind == AuditEventKind.VALIDATION_RESULT and event.payload.get("status") == "pass":
            accepted.update(event.payload.get("values") or {})
        elif event.kind == AuditEventKind.DECISION:
            _require_version(artifact, event)
            chain = chains.get(event.step or "")
            if chain is None:
                raise ReplayDivergence(f"artifact has no rule step {event.step}")
            bindings = dict(event.payload.get("bindings") or {})
            for name, value in bindings.items():
                if name in accepted and accepted[name] != value:
                    raise ReplayDivergence(
                        f"decision binding {name} differs from the extraction log"
                    )
            verdict = evaluate_decision_step(chain, bindings)
            logged = (event.payload.get("decision"), event.payload.get("reason"))
            if (verdict.code, verdict.reason) != logged:
                raise ReplayDivergence(
                    f"step {event.step}: replay gives {verdict.code}, log says {logged[0]}",
                    step=event.step,
                )
            terminal = event
        elif event.kind == AuditEventKind.ESCALATION:
            _require_version(artifact, event)
            terminal = event
        if terminal is event:
            input_digest = event.payload.get("input_digest", "")

    if terminal is None:
        raise ReplayDivergence(f"instance {instance_id} has no decision or escalation")
    if terminal.kind == AuditEventKind.ESCALATION:
        status, reason = ESCALATION_CODE, terminal.payload.get("reason", "")
    else:
        status, reason = terminal.payload["decision"], terminal.payload["reason"]
    LOG.debug(f"Replayed instance {instance_id}: {status}")
    return StepOutcome(
        status=status,
        reason_code=reason,
        escalated=status == ESCALATION_CODE,
        logic_version=artifact.logic_version,
        input_digest=input_digest,
        instance_id=instance_id,
    )
