#!/usr/bin/env python3
"""
CodeFoundry - Validation Reports
Stage reports, pipeline reports, golden cases and first-pass statistics.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

from ..errors import EmptyBatch, MalformedDocument

LOG = logging.getLogger("CodeFoundry.validator")


class ValidationStage(str, Enum):
    SECURITY = "security"
    SYNTAX = "syntax"
    EXECUTION = "execution"
    ACCURACY = "accuracy"

    @property
    def order(self) -> int:
        return STAGE_ORDER.index(self)

    def __lt__(self, other: "ValidationStage") -> bool:
        return self.order < other.order


STAGE_ORDER = (
    ValidationStage.SECURITY,
    ValidationStage.SYNTAX,
    ValidationStage.EXECUTION,
    ValidationStage.ACCURACY,
)


class StageOutcome(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIPPED = "SKIPPED"


@dataclass(frozen=True)
class Finding:
    id: str
    severity: str
    message: str
    span: Optional[str] = None
    location: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "id": self.id,
            "severity": self.severity,
            "message": self.message,
        }
        if self.span:
            payload["span"] = self.span
        if self.location:
            payload["location"] = self.location
        return payload


@dataclass(frozen=True)
class StageReport:
    stage: ValidationStage
    outcome: StageOutcome
    findings: Sequence[Finding] = ()
    duration: float = 0.0
    accuracy: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "findings", tuple(self.findings))
        if self.outcome == StageOutcome.FAIL and not self.findings:
            raise ValueError(f"failing {self.stage.value} report needs at least one finding")

    @property
    def passed(self) -> bool:
        return self.outcome == StageOutcome.PASS

    @property
    def failed(self) -> bool:
        return self.outcome == StageOutcome.FAIL

    def finding_ids(self) -> List[str]:
        return [finding.id for finding in self.findings]

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "stage": self.stage.value,
            "outcome": self.outcome.value,
            "findings": [finding.to_dict() for finding in self.findings],
            "duration_ms": round(self.duration * 1000, 3),
        }
        if self.accuracy is not None:
            payload["accuracy"] = self.accuracy
        return payload


@dataclass(frozen=True)
class ValidationReport:
    """Stage reports in pipeline order; nothing follows the first FAIL"""

    stages: Sequence[StageReport]
    artifact_digest: str = ""
    simulated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        orders = [report.stage.order for report in self.stages]
        if orders != sorted(set(orders)):
            raise ValueError("stage reports must follow pipeline order")
        failures = [i for i, report in enumerate(self.stages) if report.failed]
        if failures and failures[0] != len(self.stages) - 1:
            raise ValueError("no stage report may follow a FAIL")

    @property
    def passed(self) -> bool:
        """No stage failed and at least one stage ran; skipped stages do not fail"""
        ran = [report for report in self.stages if report.outcome != StageOutcome.SKIPPED]
        return bool(ran) and all(report.passed for report in ran)

    @property
    def failed_stage(self) -> Optional[ValidationStage]:
        for report in self.stages:
            if report.failed:
                return report.stage
        return None

    def stage(self, stage: ValidationStage) -> Optional[StageReport]:
        for report in self.stages:
            if report.stage == stage:
                return report
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "overall": "PASS" if self.passed else "FAIL",
            "artifact_digest": self.artifact_digest,
            "simulated": self.simulated,
            "stages": [report.to_dict() for report in self.stages],
        }


@dataclass(frozen=True)
class GoldenCase:
    inputs: Mapping[str, Any]
    expected_verdict: str
    mocked_extractions: Optional[Mapping[str, Mapping[str, Any]]] = None
    expected_reason: Optional[str] = None
    case_id: str = ""

    def matches(self, status: str, reason: str) -> bool:
        if status != self.expected_verdict:
            return False
        return self.expected_reason is None or reason == self.expected_reason

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "inputs": dict(self.inputs),
            "expected_verdict": self.expected_verdict,
        }
        if self.case_id:
            payload["id"] = self.case_id
        if self.mocked_extractions is not None:
            payload["mocked_extractions"] = {k: dict(v) for k, v in self.mocked_extractions.items()}
        if self.expected_reason is not None:
            payload["expected_reason"] = self.expected_reason
        return payload

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], case_id: str = "") -> "GoldenCase":
        if not isinstance(data.get("inputs"), dict):
            raise ValueError("golden case needs an 'inputs' mapping")
        if not isinstance(data.get("expected_verdict"), str):
            raise ValueError("golden case needs an 'expected_verdict' code")
        extractions = data.get("mocked_extractions")
        if extractions is not None and not isinstance(extractions, dict):
            raise ValueError("'mocked_extractions' must map step names to value maps")
        return cls(
            inputs=dict(data["inputs"]),
            expected_verdict=data["expected_verdict"],
            mocked_extractions=extractions,
            expected_reason=data.get("expected_reason"),
            case_id=str(data.get("id") or case_id),
        )


def parse_golden(lines: Sequence[str], source: str = "<golden>") -> List[GoldenCase]:
    cases = []
    for number, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            cases.append(GoldenCase.from_dict(json.loads(line), case_id=f"line-{number}"))
        except (json.JSONDecodeError, ValueError, AttributeError) as e:
            raise MalformedDocument(
                f"{source}: bad golden case: {e}", path=source, line=number
            ) from None
    return cases


def load_golden(path: Union[str, Path]) -> List[GoldenCase]:
    """Read a line-delimited golden dataset (one JSON case per line)"""
    text = Path(path).read_text(encoding="utf-8")
    cases = parse_golden(text.splitlines(), source=str(path))
    LOG.debug(f"Loaded {len(cases)} golden cases from {path}")
    return cases


@dataclass(frozen=True)
class FirstPassRecord:
    """
    Per-stage first-attempt outcome of one compilation. A stage that no
    attempt reached is None.
    """

    stages: Mapping[ValidationStage, Optional[bool]] = field(default_factory=dict)
    label: str = ""

    @property
    def overall_first_pass(self) -> bool:
        return all(self.stages.get(stage) is True for stage in STAGE_ORDER)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "stages": {stage.value: self.stages.get(stage) for stage in STAGE_ORDER},
            "overall_first_pass": self.overall_first_pass,
        }

    @classmethod
    def from_report(cls, report: ValidationReport, label: str = "") -> "FirstPassRecord":
        """Record for a single-attempt report: stages after a FAIL stay None"""
        return cls(
            stages={
                stage: (None if report.stage(stage) is None else report.stage(stage).passed)
                for stage in STAGE_ORDER
            },
            label=label,
        )


def first_pass_rates(records: Sequence[FirstPassRecord]) -> Dict[str, Optional[float]]:
    """
    Fraction of records passing each stage on the first attempt, over the
    records that reached the stage, plus the overall first-pass rate.

    Raises:
        EmptyBatch: no records
    """
    if not records:
        raise EmptyBatch("first-pass rates need at least one record")
    rates: Dict[str, Optional[float]] = {}
    for stage in STAGE_ORDER:
        reached = [r.stages.get(stage) for r in records if r.stages.get(stage) is not None]
        rates[stage.value] = sum(reached) / len(reached) if reached else None
    rates["overall"] = sum(r.overall_first_pass for r in records) / len(records)
    return rates
