#!/usr/bin/env python3
"""
CodeFoundry - Compiled Artifact Module
Versioned, canonically serialized IR produced by the foundry and consumed by
the validator and executor. Identical compiles serialize byte-identically:
keys are sorted and no wall-clock value is stored.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from .digests import digest_of, sha256_hex
from .errors import InvalidFieldValue, MalformedDocument
from .library import ModuleBinding
from .ruledsl import RuleChain, VerdictSet, parse_rule
from .secgates import CANARY_PREFIX, CodeText
from .specmodel import (
    FieldDecl,
    FieldKind,
    InputDecl,
    SchemaDecl,
    StepType,
    ValidationDecl,
)

LOG = logging.getLogger("CodeFoundry.artifact")

ARTIFACT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CompiledStep:
    name: str
    step_type: StepType
    schema: Optional[SchemaDecl] = None
    validations: Tuple[ValidationDecl, ...] = ()
    logic: Optional[str] = None
    prompt_hint: Optional[str] = None

    @property
    def is_bounded(self) -> bool:
        return self.step_type == StepType.BOUNDED_INVOCATION

    def chain(self, verdicts: VerdictSet) -> RuleChain:
        return parse_rule(self.logic or "", verdicts)

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"name": self.name, "step_type": self.step_type.value}
        if self.schema is not None:
            payload["schema"] = [
                {"name": name, "kind": decl.kind.value, "nullable": decl.nullable}
                for name, decl in self.schema.entries
            ]
        if self.validations:
            payload["validations"] = [
                {"expr": v.expression, "reason": v.reason} for v in self.validations
            ]
        if self.logic is not None:
            payload["logic"] = self.logic
        if self.prompt_hint is not None:
            payload["prompt_hint"] = self.prompt_hint
        return payload

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CompiledStep":
        schema = None
        if data.get("schema") is not None:
            schema = SchemaDecl(
                entries=tuple(
                    (
                        entry["name"],
                        FieldDecl(FieldKind(entry["kind"]), bool(entry.get("nullable", True))),
                    )
                    for entry in data["schema"]
                )
            )
        return cls(
            name=data["name"],
            step_type=StepType(data["step_type"]),
            schema=schema,
            validations=tuple(
                ValidationDecl(entry["expr"], entry.get("reason"))
                for entry in data.get("validations") or []
            ),
            logic=data.get("logic"),
            prompt_hint=data.get("prompt_hint"),
        )


@dataclass(frozen=True)
class Provenance:
    spec_digest: str
    prompt_digest: str
    generator_id: str
    regeneration_count: int = 0
    generation_input_tokens: int = 0
    generation_output_tokens: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "spec_digest": self.spec_digest,
            "prompt_digest": self.prompt_digest,
            "generator_id": self.generator_id,
            "regeneration_count": self.regeneration_count,
            "generation_input_tokens": self.generation_input_tokens,
            "generation_output_tokens": self.generation_output_tokens,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Provenance":
        return cls(**{key: data[key] for key in cls.__dataclass_fields__ if key in data})


@dataclass(frozen=True)
class CanaryPolicy:
    """Canaries are minted per instance at runtime; only the policy is stored"""

    enabled: bool = True
    prefix: str = CANARY_PREFIX

    def to_dict(self) -> Dict[str, Any]:
        return {"enabled": self.enabled, "prefix": self.prefix}


@dataclass(frozen=True)
class CompiledArtifact:
    name: str
    workflow_id: str
    logic_version: str
    template_id: str
    template_kind: str
    steps: Tuple[CompiledStep, ...]
    provenance: Provenance
    inputs: Tuple[InputDecl, ...] = ()
    modules: Tuple[ModuleBinding, ...] = ()
    verdicts: Tuple[Tuple[str, str], ...] = ()
    aliases: Tuple[Tuple[str, str], ...] = ()
    scaffold: Mapping[str, Any] = field(default_factory=dict)
    canary_policy: CanaryPolicy = field(default_factory=CanaryPolicy)
    spec_document: str = ""
    validation_digest: Optional[str] = None
    format_version: int = ARTIFACT_FORMAT_VERSION

    # -- views ---------------------------------------------------------------

    @property
    def module_ids(self) -> List[str]:
        return [module.id for module in self.modules]

    @property
    def maximum_attempts(self) -> int:
        return int(self.scaffold.get("maximum_attempts", 3))

    def verdict_set(self) -> VerdictSet:
        return VerdictSet(dict(self.verdicts))

    def field_scope(self) -> Dict[str, FieldKind]:
        """Inputs plus every extraction schema field"""
        scope = {decl.name: decl.kind for decl in self.inputs}
        for step in self.steps:
            if step.schema is not None:
                for name, decl in step.schema.entries:
                    scope[name] = decl.kind
        return scope

    def module(self, capability: str) -> Optional[ModuleBinding]:
        for module in self.modules:
            if module.capability.value == capability:
                return module
        return None

    def scan_texts(self) -> List[CodeText]:
        """Everything the code gate inspects: generated logic and module parameters"""
        texts = [
            CodeText(location=f"step:{step.name}", text=step.logic)
            for step in self.steps
            if step.logic is not None
        ]
        for module in self.modules:
            texts.extend(module.code_texts())
        return texts

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": self.format_version,
            "name": self.name,
            "workflow_id": self.workflow_id,
            "logic_version": self.logic_version,
            "template_id": self.template_id,
            "template_kind": self.template_kind,
            "scaffold": dict(self.scaffold),
            "modules": [module.to_dict() for module in self.modules],
            "inputs": [{"name": d.name, "kind": d.kind.value} for d in self.inputs],
            "verdicts": dict(self.verdicts),
            "aliases": dict(self.aliases),
            "steps": [step.to_dict() for step in self.steps],
            "canary_policy": self.canary_policy.to_dict(),
            "provenance": self.provenance.to_dict(),
            "spec_document": self.spec_document,
            "validation_digest": self.validation_digest,
        }

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def content_digest(self) -> str:
        """Digest of everything except the validation digest itself"""
        payload = self.to_dict()
        payload.pop("validation_digest")
        return digest_of(payload)

    def with_validation_digest(self, digest: Optional[str] = None) -> "CompiledArtifact":
        return replace(self, validation_digest=digest)

    def sealed(self) -> "CompiledArtifact":
        return self.with_validation_digest(self.content_digest())

    def verify_provenance(self) -> bool:
        """Stored spec document re-hashes to the recorded spec digest"""
        return sha256_hex(self.spec_document) == self.provenance.spec_digest

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CompiledArtifact":
        try:
            version = data.get("format_version")
            if version != ARTIFACT_FORMAT_VERSION:
                raise InvalidFieldValue(
                    f"unsupported artifact format_version {version!r}", path="format_version"
                )
            return cls(
                format_version=version,
                name=data["name"],
                workflow_id=data["workflow_id"],
                logic_version=data["logic_version"],
                template_id=data["template_id"],
                template_kind=data["template_kind"],
                scaffold=dict(data.get("scaffold") or {}),
                modules=tuple(ModuleBinding.from_dict(m) for m in data.get("modules") or []),
                inputs=tuple(
                    InputDecl(entry["name"], FieldKind(entry["kind"]))
                    for entry in data.get("inputs") or []
                ),
                verdicts=tuple((data.get("verdicts") or {}).items()),
                aliases=tuple((data.get("aliases") or {}).items()),
                steps=tuple(CompiledStep.from_dict(s) for s in data["steps"]),
                canary_policy=CanaryPolicy(**(data.get("canary_policy") or {})),
                provenance=Provenance.from_dict(data["provenance"]),
                spec_document=data.get("spec_document", ""),
                validation_digest=data.get("validation_digest"),
            )
        except KeyError as e:
            raise InvalidFieldValue(f"artifact is missing {e}", path=str(e)) from None
        except (TypeError, ValueError) as e:
            raise InvalidFieldValue(f"artifact is invalid: {e}") from None

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CompiledArtifact":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise MalformedDocument(
                f"artifact {path} is not valid JSON: {e.msg}", line=e.lineno, column=e.colno
            ) from None
        if not isinstance(data, dict):
            raise MalformedDocument(f"artifact {path} root must be an object")
        artifact = cls.from_dict(data)
        LOG.debug(f"Loaded artifact '{artifact.workflow_id}' from {path}")
        return artifact
