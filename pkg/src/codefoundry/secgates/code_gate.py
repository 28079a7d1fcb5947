#!/usr/bin/env python3
"""
CodeFoundry - Code Gate
Static textual rules (CWE classes, secrets, smuggled instructions) over
generated logic and module parameters.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional

from .policy import GatePolicy
from .rules import Gate, GateFinding, RuleSet, default_rules

LOG = logging.getLogger("CodeFoundry.secgates")


@dataclass(frozen=True)
class CodeText:
    """One scannable text: a rule chain or a module parameter value"""

    location: str
    text: str
    key: Optional[str] = None


def code_gate_scan(
    texts: Iterable[CodeText],
    policy: Optional[GatePolicy] = None,
    rules: Optional[RuleSet] = None,
) -> List[GateFinding]:
    policy = policy or GatePolicy()
    rules = rules or default_rules()
    code_rules = rules.for_gate(Gate.CODE)

    findings: List[GateFinding] = []
    for item in texts:
        for rule in code_rules:
            if not rule.applies_to_key(item.key):
                continue
            for match in rule.finditer(item.text):
                finding = GateFinding(
                    gate=Gate.CODE,
                    rule_id=rule.id,
                    span=match.span(),
                    action=policy.code_action(rule.severity),
                    severity=rule.severity,
                    category=rule.category,
                    cwe_tag=rule.cwe_tag,
                    location=item.location,
                )
                findings.append(finding)
                LOG.warning(
                    f"Code gate: {rule.id} ({rule.severity.value}) in {item.location} "
                    f"at {finding.span}"
                )
    return findings
