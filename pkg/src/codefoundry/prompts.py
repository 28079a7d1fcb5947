#!/usr/bin/env python3
"""
CodeFoundry - Prompt Assembly
Labelled prompt sections rendered from Jinja2 templates. The digest covers
the rendered sections only, so identical inputs give identical digests.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple

from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateError

from .digests import sha256_hex
from .errors import LibraryError
from .resources import get_templates_path

LOG = logging.getLogger("CodeFoundry.prompts")

RULE_OUTPUT_GRAMMAR = "codefoundry-rule-dsl/1"
JSON_OUTPUT_GRAMMAR = "json-object/1"


@dataclass(frozen=True)
class AssembledPrompt:
    sections: Tuple[Tuple[str, str], ...]
    # lookup hints for mock clients; not part of the digest
    metadata: Tuple[Tuple[str, str], ...] = ()

    @property
    def text(self) -> str:
        return "\n\n".join(f"## {label}\n{body}" for label, body in self.sections)

    @property
    def digest(self) -> str:
        return sha256_hex(self.text)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(label for label, _ in self.sections)

    def section(self, label: str) -> Optional[str]:
        for section_label, body in self.sections:
            if section_label == label:
                return body
        return None

    def meta(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return dict(self.metadata).get(key, default)

    @property
    def fixture_key(self) -> Optional[str]:
        return self.meta("fixture_key")

    @property
    def output_grammar(self) -> str:
        return self.meta("output_grammar", RULE_OUTPUT_GRAMMAR)

    def with_section(self, label: str, body: str) -> "AssembledPrompt":
        return AssembledPrompt(sections=self.sections + ((label, body),), metadata=self.metadata)


class PromptRenderer:
    """Renders prompt section templates from the package templates directory"""

    def __init__(self, templates_dir: Optional[str] = None):
        directory = templates_dir or str(get_templates_path())
        self.env = Environment(
            loader=FileSystemLoader(directory),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=False,
            autoescape=False,
        )

    def render(self, template_name: str, **context: Any) -> str:
        try:
            return self.env.get_template(template_name).render(**context).strip()
        except TemplateError as e:
            raise LibraryError(f"Cannot render prompt template {template_name}: {e}") from None


@lru_cache(maxsize=1)
def default_renderer() -> PromptRenderer:
    return PromptRenderer()


def metadata(**values: Optional[str]) -> Tuple[Tuple[str, str], ...]:
    return tuple(sorted((k, v) for k, v in values.items() if v is not None))


def render_sections(
    renderer: PromptRenderer, sections: Tuple[Tuple[str, str], ...], context: Dict[str, Any]
) -> Tuple[Tuple[str, str], ...]:
    """Render (label, template name) pairs with one shared context"""
    rendered = tuple((label, renderer.render(name, **context)) for label, name in sections)
    LOG.debug(f"Rendered prompt sections: {[label for label, _ in rendered]}")
    return rendered
