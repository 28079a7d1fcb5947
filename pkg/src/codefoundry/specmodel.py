#!/usr/bin/env python3
"""
CodeFoundry - Workflow Specification Module
Strict parser, serializer and cross-field validator for YAML workflow specs:
metadata, typed inputs and ordered logic steps (bounded invocations and
deterministic rules).
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import yaml

from .errors import (
    InvalidFieldValue,
    MalformedDocument,
    MissingRequiredField,
    RuleError,
    UnknownField,
)

LOG = logging.getLogger("CodeFoundry.specmodel")

IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
VERDICT_CODE_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")
DEFAULT_VERSION = "v1.0"

TOP_LEVEL_KEYS = ("metadata", "inputs", "logic_requirements")
METADATA_KEYS = ("name", "version", "compliance", "template", "description", "verdicts")
INPUT_KEYS = ("name", "type")
STEP_KEYS = ("step", "type", "schema", "validation", "logic", "prompt_hint")
SCHEMA_ENTRY_KEYS = ("kind", "type", "nullable")
VALIDATION_KEYS = ("expr", "reason")


class FieldKind(str, Enum):
    """Value kinds for inputs and extraction schemas"""

    TEXT = "text"
    BOOLEAN = "boolean"
    INTEGER = "integer"
    REAL = "real"
    STRING = "string"

    @property
    def is_numeric(self) -> bool:
        return self in (FieldKind.INTEGER, FieldKind.REAL)

    @property
    def is_textual(self) -> bool:
        return self in (FieldKind.TEXT, FieldKind.STRING)


KIND_ALIASES: Dict[str, FieldKind] = {
    "float": FieldKind.REAL,
    "double": FieldKind.REAL,
    "number": FieldKind.REAL,
    "int": FieldKind.INTEGER,
    "bool": FieldKind.BOOLEAN,
    "str": FieldKind.STRING,
}

SCHEMA_KINDS = frozenset(
    {FieldKind.BOOLEAN, FieldKind.INTEGER, FieldKind.REAL, FieldKind.STRING}
)


class StepType(str, Enum):
    BOUNDED_INVOCATION = "bounded_invocation"
    DETERMINISTIC_RULE = "deterministic_rule"


@dataclass(frozen=True)
class FieldDecl:
    kind: FieldKind
    nullable: bool = True


@dataclass(frozen=True)
class SchemaDecl:
    """Ordered field declarations of one bounded invocation"""

    entries: Tuple[Tuple[str, FieldDecl], ...] = ()

    def as_dict(self) -> Dict[str, FieldDecl]:
        return dict(self.entries)

    @property
    def field_names(self) -> List[str]:
        return [name for name, _ in self.entries]

    def __contains__(self, name: object) -> bool:
        return any(entry_name == name for entry_name, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ValidationDecl:
    """Validation expression with an optional escalation reason"""

    expression: str
    reason: Optional[str] = None


@dataclass(frozen=True)
class InputDecl:
    name: str
    kind: FieldKind


@dataclass(frozen=True)
class StepSpec:
    name: str
    step_type: StepType
    schema: Optional[SchemaDecl] = None
    validations: Tuple[ValidationDecl, ...] = ()
    logic: Optional[str] = None
    prompt_hint: Optional[str] = None

    @property
    def is_bounded(self) -> bool:
        return self.step_type == StepType.BOUNDED_INVOCATION

    @property
    def shape(self) -> str:
        """Single-letter shape used by template slot patterns"""
        return "B" if self.is_bounded else "R"


@dataclass(frozen=True)
class WorkflowSpec:
    name: str
    version: str = DEFAULT_VERSION
    compliance_tags: Tuple[str, ...] = ()
    inputs: Tuple[InputDecl, ...] = ()
    steps: Tuple[StepSpec, ...] = ()
    template_override: Optional[str] = None
    description: Optional[str] = None
    verdicts: Tuple[Tuple[str, str], ...] = ()

    @property
    def workflow_id(self) -> str:
        """Identifier slug derived from the display name"""
        slug = re.sub(r"[^A-Za-z0-9]+", "_", self.name).strip("_").lower()
        if slug and slug[0].isdigit():
            slug = f"wf_{slug}"
        return slug

    @property
    def shapes(self) -> str:
        return "".join(step.shape for step in self.steps)

    def input_kinds(self) -> Dict[str, FieldKind]:
        return {decl.name: decl.kind for decl in self.inputs}

    def step(self, name: str) -> Optional[StepSpec]:
        for candidate in self.steps:
            if candidate.name == name:
                return candidate
        return None

    @property
    def rule_steps(self) -> List[StepSpec]:
        return [step for step in self.steps if not step.is_bounded]

    @property
    def bounded_steps(self) -> List[StepSpec]:
        return [step for step in self.steps if step.is_bounded]


@dataclass(frozen=True)
class SpecDiagnostic:
    """Cross-field problem found by validate_spec"""

    code: str
    path: str
    message: str

    def to_dict(self) -> Dict[str, str]:
        return {"code": self.code, "path": self.path, "message": self.message}


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def resolve_kind(value: Any, path: str, allowed: Optional[Iterable[FieldKind]] = None) -> FieldKind:
    """Map a declared kind name (or alias such as float) to a FieldKind"""
    if not isinstance(value, str):
        raise InvalidFieldValue(f"kind at {path} must be a string", path=path)
    name = value.strip().lower()
    kind = KIND_ALIASES.get(name)
    if kind is None:
        try:
            kind = FieldKind(name)
        except ValueError:
            raise InvalidFieldValue(f"unknown kind '{value}' at {path}", path=path) from None
    if allowed is not None and kind not in allowed:
        raise InvalidFieldValue(f"kind '{value}' not allowed at {path}", path=path)
    return kind


def _check_keys(mapping: Mapping[Any, Any], allowed: Iterable[str], path: str) -> None:
    allowed_keys = set(allowed)
    for key in mapping:
        if key not in allowed_keys:
            key_path = f"{path}.{key}" if path else str(key)
            raise UnknownField(f"unknown field {key_path}", path=key_path)


def _expect_mapping(value: Any, path: str) -> Mapping[Any, Any]:
    if not isinstance(value, dict):
        raise InvalidFieldValue(f"{path} must be a mapping", path=path)
    return value


def _expect_list(value: Any, path: str) -> List[Any]:
    if not isinstance(value, list):
        raise InvalidFieldValue(f"{path} must be a list", path=path)
    return value


def _expect_str(value: Any, path: str, allow_empty: bool = False) -> str:
    if not isinstance(value, str):
        raise InvalidFieldValue(f"{path} must be a string", path=path)
    if not allow_empty and not value.strip():
        raise InvalidFieldValue(f"{path} must not be empty", path=path)
    return value


def _require(mapping: Mapping[Any, Any], key: str, path: str) -> Any:
    if key not in mapping or mapping[key] is None:
        full_path = f"{path}.{key}" if path else key
        raise MissingRequiredField(f"missing required field {full_path}", path=full_path)
    return mapping[key]


def _parse_metadata(raw: Any) -> Dict[str, Any]:
    if raw is None:
        raise MissingRequiredField("missing required field metadata.name", path="metadata.name")
    metadata = _expect_mapping(raw, "metadata")
    _check_keys(metadata, METADATA_KEYS, "metadata")
    name = _expect_str(_require(metadata, "name", "metadata"), "metadata.name")
    if not re.search(r"[A-Za-z0-9]", name):
        raise InvalidFieldValue(
            "metadata.name needs at least one letter or digit", path="metadata.name"
        )

    version = metadata.get("version")
    if version is None:
        version = DEFAULT_VERSION
    elif isinstance(version, (int, float)) and not isinstance(version, bool):
        version = str(version)
    else:
        version = _expect_str(version, "metadata.version")

    tags = []
    raw_tags = _expect_list(metadata.get("compliance") or [], "metadata.compliance")
    for index, tag in enumerate(raw_tags):
        tags.append(_expect_str(tag, f"metadata.compliance[{index}]").strip())

    template = metadata.get("template")
    if template is not None:
        template = _expect_str(template, "metadata.template").strip()

    description = metadata.get("description")
    if description is not None:
        description = _expect_str(description, "metadata.description", allow_empty=True)

    verdicts = []
    raw_verdicts = metadata.get("verdicts")
    if raw_verdicts is not None:
        for code, reason in _expect_mapping(raw_verdicts, "metadata.verdicts").items():
            code_path = f"metadata.verdicts.{code}"
            code = _expect_str(code, code_path)
            verdicts.append((code, _expect_str(reason, code_path)))

    return {
        "name": name,
        "version": version,
        "compliance_tags": tuple(tags),
        "template_override": template,
        "description": description,
        "verdicts": tuple(verdicts),
    }


def _parse_inputs(raw: Any) -> Tuple[InputDecl, ...]:
    decls = []
    for index, item in enumerate(_expect_list(raw if raw is not None else [], "inputs")):
        path = f"inputs[{index}]"
        entry = _expect_mapping(item, path)
        _check_keys(entry, INPUT_KEYS, path)
        name = _expect_str(_require(entry, "name", path), f"{path}.name").strip()
        kind = resolve_kind(_require(entry, "type", path), f"{path}.type")
        decls.append(InputDecl(name=name, kind=kind))
    return tuple(decls)


def _parse_schema(raw: Any, path: str) -> SchemaDecl:
    entries = []
    for field_name, declared in _expect_mapping(raw, path).items():
        field_path = f"{path}.{field_name}"
        field_name = _expect_str(field_name, field_path)
        if isinstance(declared, dict):
            _check_keys(declared, SCHEMA_ENTRY_KEYS, field_path)
            kind_value = declared.get("kind", declared.get("type"))
            if kind_value is None:
                raise MissingRequiredField(
                    f"missing required field {field_path}.kind", path=f"{field_path}.kind"
                )
            kind = resolve_kind(kind_value, f"{field_path}.kind", SCHEMA_KINDS)
            nullable = declared.get("nullable", True)
            if not isinstance(nullable, bool):
                raise InvalidFieldValue(
                    f"{field_path}.nullable must be a boolean", path=f"{field_path}.nullable"
                )
        else:
            kind = resolve_kind(declared, field_path, SCHEMA_KINDS)
            nullable = True
        entries.append((field_name, FieldDecl(kind=kind, nullable=nullable)))
    return SchemaDecl(entries=tuple(entries))


def _parse_validations(raw: Any, path: str) -> Tuple[ValidationDecl, ...]:
    decls = []
    for index, item in enumerate(_expect_list(raw, path)):
        item_path = f"{path}[{index}]"
        if isinstance(item, dict):
            _check_keys(item, VALIDATION_KEYS, item_path)
            expression = _expect_str(_require(item, "expr", item_path), f"{item_path}.expr")
            reason = item.get("reason")
            if reason is not None:
                reason = _expect_str(reason, f"{item_path}.reason")
            decls.append(ValidationDecl(expression=expression.strip(), reason=reason))
        else:
            decls.append(ValidationDecl(expression=_expect_str(item, item_path).strip()))
    return tuple(decls)


def _parse_step(item: Any, index: int) -> StepSpec:
    path = f"logic_requirements[{index}]"
    entry = _expect_mapping(item, path)
    _check_keys(entry, STEP_KEYS, path)
    name = _expect_str(_require(entry, "step", path), f"{path}.step").strip()
    type_value = _expect_str(_require(entry, "type", path), f"{path}.type").strip()
    try:
        step_type = StepType(type_value)
    except ValueError:
        raise InvalidFieldValue(
            f"unsupported step type '{type_value}' at {path}.type", path=f"{path}.type"
        ) from None

    schema = None
    if entry.get("schema") is not None:
        schema = _parse_schema(entry["schema"], f"{path}.schema")

    validations: Tuple[ValidationDecl, ...] = ()
    if entry.get("validation") is not None:
        validations = _parse_validations(entry["validation"], f"{path}.validation")

    logic = entry.get("logic")
    if logic is not None:
        logic = _expect_str(logic, f"{path}.logic", allow_empty=True).strip()

    prompt_hint = entry.get("prompt_hint")
    if prompt_hint is not None:
        prompt_hint = _expect_str(prompt_hint, f"{path}.prompt_hint", allow_empty=True)

    return StepSpec(
        name=name,
        step_type=step_type,
        schema=schema,
        validations=validations,
        logic=logic,
        prompt_hint=prompt_hint,
    )


def parse_spec(source_text: str) -> WorkflowSpec:
    """
    Parse a YAML workflow specification in strict mode.

    Raises:
        MalformedDocument: YAML syntax error or non-mapping root
        UnknownField: key outside the allowed set
        MissingRequiredField: required key absent
        InvalidFieldValue: value of the wrong shape
    """
    try:
        document = yaml.safe_load(source_text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        raise MalformedDocument(
            f"invalid YAML: {problem}",
            line=mark.line + 1 if mark is not None else None,
            column=mark.column + 1 if mark is not None else None,
        ) from None
    except (ValueError, TypeError, RecursionError) as e:
        raise MalformedDocument(f"invalid YAML: {e}") from None

    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise MalformedDocument("document root must be a mapping")

    _check_keys(document, TOP_LEVEL_KEYS, "")
    metadata = _parse_metadata(document.get("metadata"))
    inputs = _parse_inputs(document.get("inputs"))

    raw_steps = _require(document, "logic_requirements", "")
    steps = tuple(
        _parse_step(item, index)
        for index, item in enumerate(_expect_list(raw_steps, "logic_requirements"))
    )

    return WorkflowSpec(inputs=inputs, steps=steps, **metadata)


def load_spec(path: Union[str, Path]) -> WorkflowSpec:
    """Read and parse a workflow specification file"""
    text = Path(path).read_text(encoding="utf-8")
    spec = parse_spec(text)
    LOG.debug(f"Loaded workflow spec '{spec.name}' from {path}")
    return spec


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


class _SpecDumper(yaml.SafeDumper):
    pass


def _str_representer(dumper: yaml.SafeDumper, value: str) -> yaml.ScalarNode:
    if "\n" in value:
        return dumper.represent_scalar("tag:yaml.org,2002:str", value, style="|")
    return dumper.represent_scalar("tag:yaml.org,2002:str", value)


_SpecDumper.add_representer(str, _str_representer)


def spec_to_dict(spec: WorkflowSpec) -> Dict[str, Any]:
    """Plain document structure mirroring the YAML format"""
    metadata: Dict[str, Any] = {"name": spec.name, "version": spec.version}
    if spec.compliance_tags:
        metadata["compliance"] = list(spec.compliance_tags)
    if spec.template_override:
        metadata["template"] = spec.template_override
    if spec.description is not None:
        metadata["description"] = spec.description
    if spec.verdicts:
        metadata["verdicts"] = {code: reason for code, reason in spec.verdicts}

    steps = []
    for step in spec.steps:
        entry: Dict[str, Any] = {"step": step.name, "type": step.step_type.value}
        if step.schema is not None:
            entry["schema"] = {
                name: (
                    decl.kind.value
                    if decl.nullable
                    else {"kind": decl.kind.value, "nullable": False}
                )
                for name, decl in step.schema.entries
            }
        if step.validations:
            entry["validation"] = [
                v.expression if v.reason is None else {"expr": v.expression, "reason": v.reason}
                for v in step.validations
            ]
        if step.logic is not None:
            entry["logic"] = step.logic
        if step.prompt_hint is not None:
            entry["prompt_hint"] = step.prompt_hint
        steps.append(entry)

    return {
        "metadata": metadata,
        "inputs": [{"name": decl.name, "type": decl.kind.value} for decl in spec.inputs],
        "logic_requirements": steps,
    }


def serialize_spec(spec: WorkflowSpec) -> str:
    return yaml.dump(
        spec_to_dict(spec),
        Dumper=_SpecDumper,
        sort_keys=False,
        default_flow_style=False,
        allow_unicode=True,
    )


# ---------------------------------------------------------------------------
# Cross-field validation
# ---------------------------------------------------------------------------


@dataclass
class _DiagnosticCollector:
    diagnostics: List[SpecDiagnostic] = field(default_factory=list)

    def add(self, code: str, path: str, message: str) -> None:
        self.diagnostics.append(SpecDiagnostic(code=code, path=path, message=message))


def _validation_fields(expression: str) -> Optional[List[str]]:
    # Imported here: ruledsl depends on this module for FieldKind.
    from .ruledsl import parse_expr, referenced_fields

    try:
        return referenced_fields(parse_expr(expression))
    except RuleError:
        return None


def validate_spec(spec: WorkflowSpec) -> List[SpecDiagnostic]:
    """Return every cross-field invariant violation (empty list when valid)"""
    out = _DiagnosticCollector()

    seen_inputs = set()
    for index, decl in enumerate(spec.inputs):
        path = f"inputs[{index}].name"
        if not IDENTIFIER_RE.match(decl.name):
            out.add("invalid_identifier", path, f"input name '{decl.name}' is not an identifier")
        if decl.name in seen_inputs:
            out.add("duplicate_input", path, f"duplicate input name '{decl.name}'")
        seen_inputs.add(decl.name)

    if spec.template_override is not None and not IDENTIFIER_RE.match(spec.template_override):
        out.add(
            "invalid_identifier",
            "metadata.template",
            f"template override '{spec.template_override}' is not an identifier",
        )

    for code, _ in spec.verdicts:
        if not VERDICT_CODE_RE.match(code):
            out.add(
                "invalid_verdict_code",
                f"metadata.verdicts.{code}",
                f"verdict code '{code}' must be uppercase letters, digits or underscores",
            )

    if not spec.steps:
        out.add("no_steps", "logic_requirements", "workflow declares no steps")

    seen_steps = set()
    field_owner: Dict[str, str] = {}
    for index, step in enumerate(spec.steps):
        path = f"logic_requirements[{index}]"
        if not IDENTIFIER_RE.match(step.name):
            out.add(
                "invalid_identifier",
                f"{path}.step",
                f"step name '{step.name}' is not an identifier",
            )
        if step.name in seen_steps:
            out.add("duplicate_step", f"{path}.step", f"duplicate step name '{step.name}'")
        seen_steps.add(step.name)

        if step.is_bounded:
            if step.schema is None:
                out.add(
                    "missing_schema", f"{path}.schema", f"bounded step '{step.name}' needs a schema"
                )
            elif len(step.schema) == 0:
                out.add(
                    "empty_schema",
                    f"{path}.schema",
                    f"bounded step '{step.name}' has an empty schema",
                )
            if step.logic is not None:
                out.add(
                    "unexpected_logic",
                    f"{path}.logic",
                    f"bounded step '{step.name}' cannot carry logic",
                )
        else:
            if step.logic is None or not step.logic.strip():
                out.add("missing_logic", f"{path}.logic", f"rule step '{step.name}' needs logic")
            if step.schema is not None:
                out.add(
                    "unexpected_schema",
                    f"{path}.schema",
                    f"rule step '{step.name}' cannot carry a schema",
                )
            if step.validations:
                out.add(
                    "unexpected_validation",
                    f"{path}.validation",
                    f"rule step '{step.name}' cannot carry validations",
                )

        schema_fields = step.schema.field_names if step.schema is not None else []
        for field_name in schema_fields:
            field_path = f"{path}.schema.{field_name}"
            if not IDENTIFIER_RE.match(field_name):
                out.add(
                    "invalid_identifier",
                    field_path,
                    f"field name '{field_name}' is not an identifier",
                )
            if field_name in seen_inputs:
                out.add("field_collision", field_path, f"field '{field_name}' shadows an input")
            elif field_name in field_owner:
                out.add(
                    "field_collision",
                    field_path,
                    f"field '{field_name}' already declared by step '{field_owner[field_name]}'",
                )
            else:
                field_owner[field_name] = step.name

        if step.is_bounded:
            scope = set(schema_fields) | seen_inputs
            for v_index, validation in enumerate(step.validations):
                v_path = f"{path}.validation[{v_index}]"
                referenced = _validation_fields(validation.expression)
                if referenced is None:
                    out.add(
                        "unparseable_expression",
                        v_path,
                        f"validation '{validation.expression}' does not parse",
                    )
                    continue
                for name in referenced:
                    if name not in scope:
                        out.add("unknown_field", v_path, f"unknown field {name} in validation")

    if out.diagnostics:
        LOG.debug(f"Spec '{spec.name}' has {len(out.diagnostics)} diagnostics")
    return out.diagnostics
