#!/usr/bin/env python3
"""
CodeFoundry - Security Rule Corpus
Versioned textual rules shared by the input, code and output gates, each
carrying a positive and a negative self-test fixture.
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import yaml

from ..errors import LibraryError
from ..resources import get_data_path

LOG = logging.getLogger("CodeFoundry.secgates")

RULES_FORMAT_VERSION = 1
CWE_TAGS = frozenset({"CWE-94", "CWE-89", "CWE-502", "CWE-78", "CWE-328", "SECRETS"})
RULE_CATEGORIES = frozenset(
    {"injection", "blob", "pii", "cwe", "secret", "llm_override", "prompt_echo"}
)
RULE_KEYS = frozenset(
    {
        "id",
        "gate",
        "category",
        "cwe_tag",
        "severity",
        "pattern",
        "description",
        "positive_fixture",
        "negative_fixture",
        "pii_category",
        "applies_to",
    }
)


class Severity(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"

    @property
    def rank(self) -> int:
        return ["low", "medium", "high", "critical"].index(self.value)

    def at_least(self, other: "Severity") -> bool:
        return self.rank >= other.rank


class Gate(str, Enum):
    INPUT = "input"
    CODE = "code"
    OUTPUT = "output"


class GateAction(str, Enum):
    BLOCK = "block"
    REDACT = "redact"
    FLAG = "flag"


@lru_cache(maxsize=512)
def compile_pattern(pattern: str) -> "re.Pattern[str]":
    return re.compile(pattern)


@dataclass(frozen=True)
class SecurityRule:
    id: str
    gate: Gate
    category: str
    severity: Severity
    pattern: str
    description: str
    positive_fixture: str
    negative_fixture: str
    cwe_tag: Optional[str] = None
    pii_category: Optional[str] = None
    applies_to: Tuple[str, ...] = ()

    @property
    def regex(self) -> "re.Pattern[str]":
        return compile_pattern(self.pattern)

    def finditer(self, text: str) -> Iterator["re.Match[str]"]:
        return self.regex.finditer(text)

    def fires(self, text: str) -> bool:
        return self.regex.search(text) is not None

    def applies_to_key(self, key: Optional[str]) -> bool:
        """Key-restricted rules only see module parameters with a matching key"""
        if not self.applies_to:
            return True
        if key is None:
            return False
        key = key.lower()
        return any(key == name or key.endswith(f"_{name}") for name in self.applies_to)


@dataclass(frozen=True)
class GateFinding:
    gate: Gate
    rule_id: str
    span: Tuple[int, int]
    action: GateAction
    severity: Severity
    category: str
    cwe_tag: Optional[str] = None
    location: Optional[str] = None
    note: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "gate": self.gate.value,
            "rule_id": self.rule_id,
            "span": list(self.span),
            "action": self.action.value,
            "severity": self.severity.value,
            "category": self.category,
        }
        if self.cwe_tag:
            payload["cwe_tag"] = self.cwe_tag
        if self.location:
            payload["location"] = self.location
        if self.note:
            payload["note"] = self.note
        return payload


class RuleSet:
    """Immutable collection of rules indexed by id"""

    def __init__(self, rules: List[SecurityRule], version: int = RULES_FORMAT_VERSION):
        self.version = version
        self._rules = tuple(rules)
        self._by_id = {rule.id: rule for rule in self._rules}
        if len(self._by_id) != len(self._rules):
            counts = Counter(rule.id for rule in self._rules)
            duplicates = sorted(rule_id for rule_id, count in counts.items() if count > 1)
            raise LibraryError(f"Duplicate security rule ids: {duplicates}")

    def __iter__(self) -> Iterator[SecurityRule]:
        return iter(self._rules)

    def __len__(self) -> int:
        return len(self._rules)

    def get(self, rule_id: str) -> SecurityRule:
        return self._by_id[rule_id]

    def for_gate(self, gate: Gate, category: Optional[str] = None) -> List[SecurityRule]:
        return [
            rule
            for rule in self._rules
            if rule.gate == gate and (category is None or rule.category == category)
        ]

    def self_test(self) -> List[str]:
        """Ids of rules whose positive fixture misses or negative fixture fires"""
        failures = []
        for rule in self._rules:
            if not rule.fires(rule.positive_fixture):
                failures.append(rule.id)
                LOG.error(f"Rule {rule.id}: positive fixture did not fire")
            elif rule.fires(rule.negative_fixture):
                failures.append(rule.id)
                LOG.error(f"Rule {rule.id}: negative fixture fired")
        return failures


def _rule_from_dict(entry: Dict[str, Any], source: str) -> SecurityRule:
    rule_id = entry.get("id", "?")
    unknown = set(entry) - RULE_KEYS
    if unknown:
        raise LibraryError(f"{source}: rule {rule_id} has unknown keys {sorted(unknown)}")
    for key in ("id", "gate", "category", "severity", "pattern", "description"):
        if not entry.get(key):
            raise LibraryError(f"{source}: rule {rule_id} is missing '{key}'")
    for key in ("positive_fixture", "negative_fixture"):
        if not isinstance(entry.get(key), str) or not entry[key]:
            raise LibraryError(f"{source}: rule {rule_id} needs a non-empty {key}")
    if entry["category"] not in RULE_CATEGORIES:
        raise LibraryError(f"{source}: rule {rule_id} has unknown category {entry['category']}")
    cwe_tag = entry.get("cwe_tag")
    if cwe_tag is not None and cwe_tag not in CWE_TAGS:
        raise LibraryError(f"{source}: rule {rule_id} has unknown cwe_tag {cwe_tag}")
    try:
        compile_pattern(entry["pattern"])
        gate = Gate(entry["gate"])
        severity = Severity(entry["severity"])
    except (re.error, ValueError) as e:
        raise LibraryError(f"{source}: rule {rule_id} is invalid: {e}") from None
    return SecurityRule(
        id=entry["id"],
        gate=gate,
        category=entry["category"],
        severity=severity,
        pattern=entry["pattern"],
        description=entry["description"],
        positive_fixture=entry["positive_fixture"],
        negative_fixture=entry["negative_fixture"],
        cwe_tag=cwe_tag,
        pii_category=entry.get("pii_category"),
        applies_to=tuple(entry.get("applies_to") or ()),
    )


def load_rules(path: Optional[Union[str, Path]] = None) -> RuleSet:
    """Load a rule corpus file (defaults to the shipped corpus)"""
    rules_path = Path(path) if path else get_data_path("security_rules.yaml")
    try:
        document = yaml.safe_load(rules_path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise LibraryError(f"Cannot read rule corpus {rules_path}: {e}") from None

    version = document.get("format_version")
    if version != RULES_FORMAT_VERSION:
        raise LibraryError(f"{rules_path}: unsupported format_version {version!r}")
    rules = [_rule_from_dict(entry, str(rules_path)) for entry in document.get("rules") or []]
    LOG.debug(f"Loaded {len(rules)} security rules from {rules_path}")
    return RuleSet(rules, version=version)


@lru_cache(maxsize=1)
def default_rules() -> RuleSet:
    return load_rules()


def load_benign_texts(name: str, path: Optional[Union[str, Path]] = None) -> List[str]:
    """Shipped benign corpus texts (`inputs` or `outputs`) for false-positive checks"""
    corpus_path = Path(path) if path else get_data_path("corpus", f"benign_{name}.yaml")
    try:
        document = yaml.safe_load(corpus_path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise LibraryError(f"Cannot read benign corpus {corpus_path}: {e}") from None
    if document.get("format_version") != RULES_FORMAT_VERSION:
        version = document.get("format_version")
        raise LibraryError(f"{corpus_path}: unsupported format_version {version!r}")
    texts = document.get("texts") or []
    if not all(isinstance(text, str) and text for text in texts):
        raise LibraryError(f"{corpus_path}: every entry in texts must be a non-empty string")
    return list(texts)
