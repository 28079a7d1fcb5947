#!/usr/bin/env python3
"""
CodeFoundry - Input Gate
Rule-based injection detection and PII redaction for untrusted text bound
for a quarantined client.
"""

import base64
import binascii
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .policy import GatePolicy
from .rules import Gate, GateAction, GateFinding, RuleSet, SecurityRule, default_rules

LOG = logging.getLogger("CodeFoundry.secgates")


@dataclass
class InputScanResult:
    text: str
    findings: List[GateFinding] = field(default_factory=list)
    # placeholder -> original value; kept in-process only
    redactions: Dict[str, str] = field(default_factory=dict, repr=False)

    @property
    def blocked(self) -> bool:
        return any(f.action == GateAction.BLOCK for f in self.findings)

    def restore(self, text: str) -> str:
        """Put redacted values back into text produced from the sanitized input"""
        for placeholder, original in self.redactions.items():
            text = text.replace(placeholder, original)
        return text

    def to_dict(self) -> Dict[str, Any]:
        return {
            "text": self.text,
            "blocked": self.blocked,
            "findings": [f.to_dict() for f in self.findings],
        }


def _finding(
    rule: SecurityRule,
    span: Tuple[int, int],
    action: GateAction,
    location: Optional[str],
    note: Optional[str] = None,
) -> GateFinding:
    return GateFinding(
        gate=Gate.INPUT,
        rule_id=rule.id,
        span=span,
        action=action,
        severity=rule.severity,
        category=rule.category,
        cwe_tag=rule.cwe_tag,
        location=location,
        note=note,
    )


def _decode_blob(blob: str) -> Optional[str]:
    padded = blob + "=" * (-len(blob) % 4)
    try:
        raw = base64.b64decode(padded, validate=True)
    except (binascii.Error, ValueError):
        return None
    return raw.decode("utf-8", errors="ignore")


def _scan_injection(text: str, rules: RuleSet, action: GateAction, location, span=None, note=None):
    findings = []
    for rule in rules.for_gate(Gate.INPUT, "injection"):
        for match in rule.finditer(text):
            findings.append(_finding(rule, span or match.span(), action, location, note))
    return findings


def redact_pii(
    text: str,
    rules: RuleSet,
    policy: GatePolicy,
    location: Optional[str],
    prefix: str = "PII",
) -> Tuple[str, List[GateFinding], Dict[str, str]]:
    """Sanitized text, findings and {placeholder: original}; placeholders are [prefix:category#n]"""
    matches = []
    for rule in rules.for_gate(Gate.INPUT, "pii"):
        if rule.pii_category not in policy.pii_categories:
            continue
        for match in rule.finditer(text):
            matches.append((match.start(), -match.end(), rule, match.group(0)))
    matches.sort(key=lambda item: (item[0], item[1]))

    findings: List[GateFinding] = []
    by_value: Dict[Tuple[str, str], str] = {}
    counters: Dict[str, int] = {}
    redactions: Dict[str, str] = {}
    pieces: List[str] = []
    cursor = 0
    for start, neg_end, rule, value in matches:
        end = -neg_end
        if start < cursor:
            continue  # overlaps an earlier match
        key = (rule.pii_category, value)
        placeholder = by_value.get(key)
        if placeholder is None:
            counters[rule.pii_category] = counters.get(rule.pii_category, 0) + 1
            placeholder = f"[{prefix}:{rule.pii_category}#{counters[rule.pii_category]}]"
            by_value[key] = placeholder
            redactions[placeholder] = value
        pieces.append(text[cursor:start])
        pieces.append(placeholder)
        cursor = end
        findings.append(_finding(rule, (start, end), policy.pii_action, location))
    pieces.append(text[cursor:])
    return "".join(pieces), findings, redactions


def input_gate_scan(
    text: str,
    policy: Optional[GatePolicy] = None,
    rules: Optional[RuleSet] = None,
    location: Optional[str] = None,
) -> InputScanResult:
    """
    Scan untrusted input text.

    Injection phrases and oversized encoded blobs become findings with the
    policy action; PII is replaced by numbered `[PII:<category>#k]`
    placeholders. Blocking is expressed as findings, the caller enforces it.
    """
    policy = policy or GatePolicy()
    rules = rules or default_rules()

    findings = _scan_injection(text, rules, policy.injection_action, location)

    for rule in rules.for_gate(Gate.INPUT, "blob"):
        for match in rule.finditer(text):
            blob = match.group(0)
            if len(blob.rstrip("=")) < policy.blob_threshold:
                continue
            findings.append(_finding(rule, match.span(), policy.blob_action, location))
            decoded = _decode_blob(blob)
            if decoded:
                findings.extend(
                    _scan_injection(
                        decoded,
                        rules,
                        policy.injection_action,
                        location,
                        span=match.span(),
                        note="decoded blob",
                    )
                )

    sanitized, pii_findings, redactions = redact_pii(text, rules, policy, location)
    findings.extend(pii_findings)
    findings.sort(key=lambda f: (f.span[0], f.rule_id))

    for finding in findings:
        if finding.category != "pii":
            LOG.warning(
                f"Input gate: {finding.rule_id} ({finding.action.value}) at {finding.span}"
                + (f" in {location}" if location else "")
            )
    if pii_findings:
        LOG.info(f"Input gate redacted {len(pii_findings)} PII spans")
    return InputScanResult(text=sanitized, findings=findings, redactions=redactions)
