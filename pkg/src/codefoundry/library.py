#!/usr/bin/env python3
"""
CodeFoundry - Compile Libraries
Templates (fixed artifact skeletons with step-shape slots), module bindings
(pre-vetted capabilities) and prompt blocks (domain constraint prose),
loaded from versioned YAML files.
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import yaml

from .errors import LibraryError
from .resources import get_data_path
from .ruledsl import DEFAULT_REASONS, VerdictSet
from .secgates import CANARY_PREFIX, CodeText, Gate, GateAction, code_gate_scan, default_rules
from .specmodel import IDENTIFIER_RE

LOG = logging.getLogger("CodeFoundry.library")

LIBRARY_FORMAT_VERSION = 1
STEP_SHAPE_RE = re.compile(r"^[BR()+*?{},0-9|]+$")


class TemplateKind(str, Enum):
    SYNC_HANDLER = "sync_handler"
    STREAMING_PROCESSOR = "streaming_processor"
    BATCH_CHECKPOINTED = "batch_checkpointed"
    VALIDATOR_WITH_FALLBACK = "validator_with_fallback"


class Capability(str, Enum):
    DB_ACCESS = "db_access"
    HTTP_CLIENT = "http_client"
    NOTIFIER = "notifier"


@dataclass(frozen=True)
class Scaffold:
    """Fixed skeleton a template contributes to every artifact"""

    phases: Tuple[str, ...]
    maximum_attempts: int = 3
    hooks: Tuple[Capability, ...] = ()
    audit_events: Tuple[str, ...] = ()
    framing: str = ""

    def to_dict(self) -> Dict[str, Any]:
        # framing is privileged prompt text and stays out of artifacts
        return {
            "phases": list(self.phases),
            "maximum_attempts": self.maximum_attempts,
            "hooks": [hook.value for hook in self.hooks],
            "audit_events": list(self.audit_events),
        }


@dataclass(frozen=True)
class Template:
    id: str
    kind: TemplateKind
    slot_schema: str
    scaffold: Scaffold
    verdicts: Tuple[Tuple[str, str], ...] = ()
    description: str = ""

    def accepts(self, shapes: str) -> bool:
        """True when the step-shape string (B/R per step) fills the slots"""
        return bool(shapes) and re.fullmatch(self.slot_schema, shapes) is not None

    def verdict_set(self, extra: Iterable[Tuple[str, str]] = ()) -> VerdictSet:
        reasons = dict(self.verdicts) or {
            code: reason for code, reason in DEFAULT_REASONS.items()
        }
        reasons.update(dict(extra))
        return VerdictSet(reasons)


@dataclass(frozen=True)
class ModuleBinding:
    id: str
    capability: Capability
    parameters: Tuple[Tuple[str, str], ...] = ()

    @property
    def params(self) -> Dict[str, str]:
        return dict(self.parameters)

    def code_texts(self) -> List[CodeText]:
        return [
            CodeText(location=f"module:{self.id}.{key}", text=value, key=key)
            for key, value in self.parameters
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "capability": self.capability.value,
            "parameters": dict(self.parameters),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModuleBinding":
        return cls(
            id=data["id"],
            capability=Capability(data["capability"]),
            parameters=tuple((str(k), str(v)) for k, v in (data.get("parameters") or {}).items()),
        )


@dataclass(frozen=True)
class PromptBlock:
    id: str
    domain_tag: str
    text: str


@dataclass(frozen=True)
class Libraries:
    """Read-only bundle handed to the foundry"""

    templates: Tuple[Template, ...] = ()
    modules: Tuple[ModuleBinding, ...] = ()
    prompt_blocks: Tuple[PromptBlock, ...] = ()
    source: Optional[str] = field(default=None, compare=False)

    def template(self, template_id: str) -> Optional[Template]:
        for template in self.templates:
            if template.id == template_id:
                return template
        return None

    def block_for(self, tag: str) -> Optional[PromptBlock]:
        for block in self.prompt_blocks:
            if block.domain_tag == tag:
                return block
        return None

    def scaffold_fragments(self) -> List[str]:
        """Privileged scaffold text that must never reach a quarantined prompt"""
        fragments = []
        for template in self.templates:
            for line in template.scaffold.framing.splitlines():
                line = line.strip()
                if len(line) >= 20:
                    fragments.append(line)
        return fragments


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _read_document(path: Path, section: str) -> List[Dict[str, Any]]:
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise LibraryError(f"Cannot read library file {path}: {e}") from None
    if not isinstance(document, dict):
        raise LibraryError(f"{path}: document root must be a mapping")
    version = document.get("format_version")
    if version != LIBRARY_FORMAT_VERSION:
        raise LibraryError(f"{path}: unsupported format_version {version!r}")
    entries = document.get(section)
    if not isinstance(entries, list):
        raise LibraryError(f"{path}: '{section}' must be a list")
    return entries


def _entry_id(entry: Any, path: Path, section: str) -> str:
    if not isinstance(entry, dict):
        raise LibraryError(f"{path}: every {section} entry must be a mapping")
    entry_id = entry.get("id")
    if not isinstance(entry_id, str) or not IDENTIFIER_RE.match(entry_id):
        raise LibraryError(f"{path}: {section} entry has an invalid id {entry_id!r}")
    return entry_id


def _check_unique(ids: List[str], path: Path) -> None:
    seen = set()
    for entry_id in ids:
        if entry_id in seen:
            raise LibraryError(f"{path}: duplicate id '{entry_id}'")
        seen.add(entry_id)


def load_templates(path: Union[str, Path]) -> Tuple[Template, ...]:
    path = Path(path)
    templates = []
    for entry in _read_document(path, "templates"):
        template_id = _entry_id(entry, path, "templates")
        try:
            kind = TemplateKind(entry.get("kind"))
            scaffold_raw = entry.get("scaffold") or {}
            hooks = tuple(Capability(hook) for hook in scaffold_raw.get("hooks") or [])
            slot_schema = str(entry["slot_schema"])
            if not STEP_SHAPE_RE.match(slot_schema):
                raise ValueError(f"slot_schema '{slot_schema}' may only use B, R and repetition")
            re.compile(slot_schema)
            scaffold = Scaffold(
                phases=tuple(scaffold_raw.get("phases") or ()),
                maximum_attempts=int(scaffold_raw.get("maximum_attempts", 3)),
                hooks=hooks,
                audit_events=tuple(scaffold_raw.get("audit_events") or ()),
                framing=str(scaffold_raw.get("framing") or "").strip(),
            )
            if scaffold.maximum_attempts < 1:
                raise ValueError("maximum_attempts must be at least 1")
            verdicts = tuple((str(c), str(r)) for c, r in (entry.get("verdicts") or {}).items())
            VerdictSet(dict(verdicts) or DEFAULT_REASONS)
        except (KeyError, ValueError, TypeError, re.error) as e:
            raise LibraryError(f"{path}: template '{template_id}' is invalid: {e}") from None
        templates.append(
            Template(
                id=template_id,
                kind=kind,
                slot_schema=slot_schema,
                scaffold=scaffold,
                verdicts=verdicts,
                description=str(entry.get("description") or ""),
            )
        )
    _check_unique([t.id for t in templates], path)
    LOG.debug(f"Loaded {len(templates)} templates from {path}")
    return tuple(templates)


def load_modules(path: Union[str, Path]) -> Tuple[ModuleBinding, ...]:
    """Load module bindings; parameters must pass the code gate"""
    path = Path(path)
    modules = []
    for entry in _read_document(path, "modules"):
        module_id = _entry_id(entry, path, "modules")
        try:
            module = ModuleBinding.from_dict(entry)
        except (KeyError, ValueError) as e:
            raise LibraryError(f"{path}: module '{module_id}' is invalid: {e}") from None
        blocking = [
            f for f in code_gate_scan(module.code_texts()) if f.action == GateAction.BLOCK
        ]
        if blocking:
            rule_ids = sorted({f.rule_id for f in blocking})
            raise LibraryError(f"{path}: module '{module_id}' fails the code gate: {rule_ids}")
        modules.append(module)
    _check_unique([m.id for m in modules], path)
    LOG.debug(f"Loaded {len(modules)} module bindings from {path}")
    return tuple(modules)


def load_prompt_blocks(path: Union[str, Path]) -> Tuple[PromptBlock, ...]:
    """Load prompt blocks; text may carry neither canary tokens nor secrets"""
    path = Path(path)
    secret_rules = default_rules().for_gate(Gate.CODE, "secret")
    blocks = []
    for entry in _read_document(path, "prompt_blocks"):
        block_id = _entry_id(entry, path, "prompt_blocks")
        tag = entry.get("domain_tag")
        text = entry.get("text")
        if not isinstance(tag, str) or not tag or not isinstance(text, str) or not text.strip():
            raise LibraryError(f"{path}: prompt block '{block_id}' needs domain_tag and text")
        if CANARY_PREFIX in text:
            raise LibraryError(f"{path}: prompt block '{block_id}' contains a canary token")
        hits = [rule.id for rule in secret_rules if rule.fires(text)]
        if hits:
            raise LibraryError(f"{path}: prompt block '{block_id}' matches secrets rules {hits}")
        blocks.append(PromptBlock(id=block_id, domain_tag=tag, text=text.strip()))
    _check_unique([b.id for b in blocks], path)
    tags = [b.domain_tag for b in blocks]
    if len(set(tags)) != len(tags):
        raise LibraryError(f"{path}: domain tags must be unique")
    return tuple(blocks)


def load_libraries(directory: Optional[Union[str, Path]] = None) -> Libraries:
    """Load templates.yaml, modules.yaml and prompt_blocks.yaml from one directory"""
    base = Path(directory) if directory else get_library_path()
    libraries = Libraries(
        templates=load_templates(base / "templates.yaml"),
        modules=load_modules(base / "modules.yaml"),
        prompt_blocks=load_prompt_blocks(base / "prompt_blocks.yaml"),
        source=str(base),
    )
    LOG.info(
        f"Libraries loaded from {base}: {len(libraries.templates)} templates, "
        f"{len(libraries.modules)} modules, {len(libraries.prompt_blocks)} prompt blocks"
    )
    return libraries


def get_library_path() -> Path:
    return get_data_path("library")


@lru_cache(maxsize=1)
def default_libraries() -> Libraries:
    return load_libraries()
