#!/usr/bin/env python3
"""
CodeFoundry - Output Gate
Canary leak detection plus outbound PII and prompt-echo scanning. A canary
hit always blocks.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional

from .canary import InstanceGateState
from .input_gate import redact_pii
from .policy import GatePolicy
from .rules import Gate, GateAction, GateFinding, RuleSet, Severity, default_rules

LOG = logging.getLogger("CodeFoundry.secgates")

CANARY_RULE_ID = "R-CANARY-LEAK"
OUTPUT_PII_PREFIX = "PII-OUT"


class OutputVerdict(str, Enum):
    CLEAN = "clean"
    LEAKED = "leaked"


@dataclass
class OutputScanResult:
    verdict: OutputVerdict
    text: str
    findings: List[GateFinding] = field(default_factory=list)

    @property
    def leaked(self) -> bool:
        return self.verdict == OutputVerdict.LEAKED

    @property
    def blocked(self) -> bool:
        return any(f.action == GateAction.BLOCK for f in self.findings)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "blocked": self.blocked,
            "findings": [f.to_dict() for f in self.findings],
        }


def output_gate_scan(
    text: str,
    state: Optional[InstanceGateState] = None,
    policy: Optional[GatePolicy] = None,
    rules: Optional[RuleSet] = None,
    location: Optional[str] = None,
) -> OutputScanResult:
    """Scan a raw response or a final workflow output before it leaves the instance"""
    policy = policy or GatePolicy()
    rules = rules or default_rules()
    findings: List[GateFinding] = []
    verdict = OutputVerdict.CLEAN

    if state is not None:
        canary = state.canary.value
        start = text.find(canary)
        if start >= 0:
            verdict = OutputVerdict.LEAKED
            findings.append(
                GateFinding(
                    gate=Gate.OUTPUT,
                    rule_id=CANARY_RULE_ID,
                    span=(start, start + len(canary)),
                    action=GateAction.BLOCK,
                    severity=Severity.CRITICAL,
                    category="canary",
                    location=location,
                )
            )
            LOG.critical(f"Canary leak detected for instance {state.instance_id}")

    for rule in rules.for_gate(Gate.OUTPUT):
        for match in rule.finditer(text):
            findings.append(
                GateFinding(
                    gate=Gate.OUTPUT,
                    rule_id=rule.id,
                    span=match.span(),
                    action=GateAction.BLOCK,
                    severity=rule.severity,
                    category=rule.category,
                    location=location,
                )
            )
            LOG.warning(f"Output gate: {rule.id} at {match.span()}")

    sanitized, pii_findings, redactions = redact_pii(
        text, rules, policy, location, prefix=OUTPUT_PII_PREFIX
    )
    findings.extend(replace(finding, gate=Gate.OUTPUT) for finding in pii_findings)
    if state is not None:
        state.redactions.update(redactions)

    return OutputScanResult(verdict=verdict, text=sanitized, findings=findings)
