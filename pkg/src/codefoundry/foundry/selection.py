#!/usr/bin/env python3
"""
CodeFoundry - Template and Module Selection
Structural matching of a workflow's step shapes against template slot
schemas, and capability lookup for the chosen scaffold's hooks.
"""

import logging
from typing import List, Sequence

from ..errors import AmbiguousTemplate, MissingCapability, NoCompatibleTemplate
from ..library import ModuleBinding, Template
from ..specmodel import WorkflowSpec

LOG = logging.getLogger("CodeFoundry.foundry")


def select_template(spec: WorkflowSpec, templates: Sequence[Template]) -> Template:
    """
    The unique template whose slot schema accepts the spec's step shapes.

    An override in the spec metadata wins when it names a compatible template.

    Raises:
        NoCompatibleTemplate: no template (or an incompatible override) fits
        AmbiguousTemplate: several templates fit and no override picks one
    """
    if not templates:
        raise NoCompatibleTemplate("template library is empty")
    shapes = spec.shapes

    if spec.template_override:
        chosen = next((t for t in templates if t.id == spec.template_override), None)
        if chosen is None:
            raise NoCompatibleTemplate(
                f"override template '{spec.template_override}' is not in the library",
                shapes=shapes,
            )
        if not chosen.accepts(shapes):
            raise NoCompatibleTemplate(
                f"override template '{chosen.id}' does not accept step shapes '{shapes}'",
                shapes=shapes,
                slot_schema=chosen.slot_schema,
            )
        LOG.debug(f"Template override '{chosen.id}' accepted for {spec.workflow_id}")
        return chosen

    compatible = [t for t in templates if t.accepts(shapes)]
    if not compatible:
        raise NoCompatibleTemplate(f"no template accepts step shapes '{shapes}'", shapes=shapes)
    if len(compatible) > 1:
        ids = sorted(t.id for t in compatible)
        raise AmbiguousTemplate(
            f"step shapes '{shapes}' fit {ids}; set metadata.template to choose",
            shapes=shapes,
            candidates=ids,
        )
    LOG.debug(f"Selected template '{compatible[0].id}' for shapes '{shapes}'")
    return compatible[0]


def select_modules(template: Template, modules: Sequence[ModuleBinding]) -> List[ModuleBinding]:
    """
    One module per scaffold hook, in hook order. Several candidates for a
    capability resolve to the lowest module id.

    Raises:
        MissingCapability: a hook has no module in the library
    """
    selected: List[ModuleBinding] = []
    for capability in dict.fromkeys(template.scaffold.hooks):
        candidates = sorted((m for m in modules if m.capability == capability), key=lambda m: m.id)
        if not candidates:
            raise MissingCapability(
                f"template '{template.id}' needs a {capability.value} module",
                capability=capability.value,
            )
        selected.append(candidates[0])
    return selected
