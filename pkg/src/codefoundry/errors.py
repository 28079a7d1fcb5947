#!/usr/bin/env python3
"""
CodeFoundry - Error Types Module
Every failure the package raises is a FoundryError subclass carrying a
machine-readable detail map, so the CLI can turn it into an exit code and
a JSON diagnostic.
"""

from typing import Any, Dict, Optional


class FoundryError(Exception):
    """Base class for all CodeFoundry errors"""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"error": type(self).__name__, "message": self.message}
        for key, value in self.details.items():
            if value is not None:
                payload[key] = value
        return payload


class UsageError(FoundryError):
    """Bad command line or configuration input"""

    exit_code = 2


# ---------------------------------------------------------------------------
# specmodel
# ---------------------------------------------------------------------------


class SpecError(FoundryError):
    """Workflow specification could not be parsed"""

    def __init__(self, message: str, path: str = "", **details: Any):
        super().__init__(message, path=path, **details)
        self.path = path


class MalformedDocument(SpecError):
    """YAML syntax error or a non-mapping document root"""

    def __init__(
        self,
        message: str,
        path: str = "",
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        super().__init__(message, path=path, line=line, column=column)
        self.line = line
        self.column = column


class UnknownField(SpecError):
    """Key not allowed at this position (strict mode)"""


class MissingRequiredField(SpecError):
    """Required key absent"""


class InvalidFieldValue(SpecError):
    """Key present but its value has the wrong shape or an illegal value"""


# ---------------------------------------------------------------------------
# ruledsl
# ---------------------------------------------------------------------------


class RuleError(FoundryError):
    """Rule language failure"""


class RuleSyntaxError(RuleError):
    """Source text does not match the rule grammar"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message, line=line, column=column)
        self.line = line
        self.column = column


class UnknownVerdict(RuleError):
    """Verdict code outside the declared verdict set"""

    def __init__(self, code: str, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(f"unknown verdict {code}", code=code, line=line, column=column)
        self.code = code
        self.line = line
        self.column = column


class MissingElse(RuleError):
    """Chain without a final ELSE branch"""


class UnboundField(RuleError):
    """Field absent from the evaluation context (distinct from null)"""

    def __init__(self, field_name: str):
        super().__init__(f"unbound field {field_name}", field=field_name)
        self.field_name = field_name


# ---------------------------------------------------------------------------
# foundry / generators
# ---------------------------------------------------------------------------


class FoundryCompileError(FoundryError):
    """Compile-time orchestration failure"""


class LibraryError(FoundryCompileError):
    """Template, module, prompt block or rule library is invalid"""


class NoCompatibleTemplate(FoundryCompileError):
    """No template accepts the workflow's step shapes"""


class AmbiguousTemplate(FoundryCompileError):
    """Two or more templates accept the step shapes and no override was given"""


class MissingCapability(FoundryCompileError):
    """Template hook needs a module capability the library lacks"""


class UnknownComplianceTag(FoundryCompileError):
    """Compliance tag without a prompt block"""


class SlotMismatch(FoundryCompileError):
    """Generated logic does not line up with the template slots"""


class RoleViolation(FoundryCompileError):
    """Client handed to a path that requires the other role"""


class CompilationFailed(FoundryCompileError):
    """Regeneration budget exhausted without a fully passing artifact"""

    def __init__(self, message: str, report: Any = None, attempts: Any = None):
        super().__init__(message)
        self.report = report
        self.attempts = attempts or []

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        if self.report is not None:
            payload["report"] = self.report.to_dict()
        payload["attempts"] = [attempt.to_dict() for attempt in self.attempts]
        return payload


class GeneratorError(FoundryError):
    """Generator client failure"""


class ClientUnavailable(GeneratorError):
    """Client could not produce a response (transport, missing fixture, exhausted script)"""


class EmptyGeneration(GeneratorError):
    """Client returned no text"""


# ---------------------------------------------------------------------------
# validator
# ---------------------------------------------------------------------------


class ValidatorError(FoundryError):
    """Validation pipeline misuse"""


class EmptyBatch(ValidatorError):
    """Statistics requested over zero records"""


# ---------------------------------------------------------------------------
# secgates
# ---------------------------------------------------------------------------


class GateError(FoundryError):
    """Security gate failure"""


class RandomnessUnavailable(GateError):
    """Secure randomness source could not be read"""


# ---------------------------------------------------------------------------
# executor
# ---------------------------------------------------------------------------


class ExecutionError(FoundryError):
    """Runtime failure"""


class InputTypeMismatch(ExecutionError):
    """Input binding does not conform to the artifact input declarations"""


class ArtifactDigestMismatch(ExecutionError):
    """Artifact content changed after validation"""


class SequenceGap(ExecutionError):
    """Audit append out of logical order"""


class ReplayDivergence(ExecutionError):
    """Replayed outcome differs from the logged one"""


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


class MetricsError(FoundryError):
    """Metric undefined for the given inputs"""


class NoBreakEven(MetricsError):
    """Compiled strategy never amortizes"""


class DivisionByZero(MetricsError):
    """Zero denominator"""


class EmptyRunSet(MetricsError):
    """No outputs to measure"""


class InsufficientSamples(MetricsError):
    """Too few samples for stable percentiles"""
