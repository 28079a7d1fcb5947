#!/usr/bin/env python3
"""
CodeFoundry - Gate Policy
Per-gate actions. A canary hit at the output gate always blocks and is not
part of the policy.
"""

from dataclasses import dataclass
from typing import Tuple

from .rules import GateAction, Severity

DEFAULT_PII_CATEGORIES = ("ssn", "email", "phone", "mrn")


@dataclass(frozen=True)
class GatePolicy:
    injection_action: GateAction = GateAction.BLOCK
    pii_action: GateAction = GateAction.REDACT
    blob_action: GateAction = GateAction.FLAG
    code_block_severity: Severity = Severity.HIGH
    pii_categories: Tuple[str, ...] = DEFAULT_PII_CATEGORIES
    blob_threshold: int = 120

    def __post_init__(self):
        object.__setattr__(self, "injection_action", GateAction(self.injection_action))
        object.__setattr__(self, "pii_action", GateAction(self.pii_action))
        object.__setattr__(self, "blob_action", GateAction(self.blob_action))
        object.__setattr__(self, "code_block_severity", Severity(self.code_block_severity))
        object.__setattr__(self, "pii_categories", tuple(self.pii_categories))

        if self.injection_action == GateAction.REDACT:
            raise ValueError("injection_action must be 'block' or 'flag'")
        if self.pii_action == GateAction.FLAG:
            raise ValueError("pii_action must be 'redact' or 'block'")
        if self.blob_action == GateAction.REDACT:
            raise ValueError("blob_action must be 'block' or 'flag'")
        if self.blob_threshold < 16:
            raise ValueError("blob_threshold must be at least 16")

    def code_action(self, severity: Severity) -> GateAction:
        return GateAction.BLOCK if severity.at_least(self.code_block_severity) else GateAction.FLAG
