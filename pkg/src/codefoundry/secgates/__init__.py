#!/usr/bin/env python3
"""
CodeFoundry - Security Gates Module
Input gate (injection + PII), code gate (CWE-class rules + secrets) and
output gate (canary leaks), driven by one versioned rule corpus
"""

from .canary import CANARY_PREFIX, CanaryToken, InstanceGateState, mint_canary
from .code_gate import CodeText, code_gate_scan
from .input_gate import InputScanResult, input_gate_scan, redact_pii
from .output_gate import CANARY_RULE_ID, OutputScanResult, OutputVerdict, output_gate_scan
from .policy import DEFAULT_PII_CATEGORIES, GatePolicy
from .rules import (
    CWE_TAGS,
    Gate,
    GateAction,
    GateFinding,
    RuleSet,
    SecurityRule,
    Severity,
    default_rules,
    load_benign_texts,
    load_rules,
)

__all__ = [
    "CANARY_PREFIX",
    "CANARY_RULE_ID",
    "CWE_TAGS",
    "DEFAULT_PII_CATEGORIES",
    "CanaryToken",
    "CodeText",
    "Gate",
    "GateAction",
    "GateFinding",
    "GatePolicy",
    "InputScanResult",
    "InstanceGateState",
    "OutputScanResult",
    "OutputVerdict",
    "RuleSet",
    "SecurityRule",
    "Severity",
    "code_gate_scan",
    "default_rules",
    "input_gate_scan",
    "load_benign_texts",
    "load_rules",
    "mint_canary",
    "output_gate_scan",
    "redact_pii",
]
