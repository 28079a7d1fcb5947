#!/usr/bin/env python3
"""
CodeFoundry - Executor Module
Deterministic runtime for compiled artifacts: bounded invocation,
validation, decision and audit trail, plus replay from the audit log.
"""

from .audit import AuditEvent, AuditEventKind, AuditLog, AuditStore
from .drift import DriftMonitor, DriftStatus
from .runtime import (
    BoundedResult,
    ExtractionRejected,
    RetryPolicy,
    StepOutcome,
    WorkflowExecutor,
    WorkflowInstance,
    append_audit,
    check_inputs,
    check_sandwich,
    evaluate_decision_step,
    parse_extraction,
    replay,
    run_workflow,
)

__all__ = [
    "AuditEvent",
    "AuditEventKind",
    "AuditLog",
    "AuditStore",
    "BoundedResult",
    "DriftMonitor",
    "DriftStatus",
    "ExtractionRejected",
    "RetryPolicy",
    "StepOutcome",
    "WorkflowExecutor",
    "WorkflowInstance",
    "append_audit",
    "check_inputs",
    "check_sandwich",
    "evaluate_decision_step",
    "parse_extraction",
    "replay",
    "run_workflow",
]
