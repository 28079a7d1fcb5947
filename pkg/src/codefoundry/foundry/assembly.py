#!/usr/bin/env python3
"""
CodeFoundry - Prompt and Artifact Assembly
Builds the generation prompt from a spec and its libraries, performs the
one privileged generation call, and assembles the compiled artifact.
"""

import logging
import re
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from ..artifact import CompiledArtifact, CompiledStep, Provenance
from ..digests import sha256_hex
from ..errors import EmptyGeneration, RoleViolation, RuleError, SlotMismatch, UnknownComplianceTag
from ..generators import ClientRole, GeneratorClient, Generation
from ..library import ModuleBinding, PromptBlock, Template
from ..metrics import TokenLedger
from ..prompts import (
    RULE_OUTPUT_GRAMMAR,
    AssembledPrompt,
    PromptRenderer,
    default_renderer,
    metadata,
    render_sections,
)
from ..ruledsl import parse_rule, to_source
from ..specmodel import WorkflowSpec, serialize_spec

LOG = logging.getLogger("CodeFoundry.foundry")

# (label, template) in prompt order
PROMPT_SECTIONS = (
    ("task", "task.j2"),
    ("schema", "schema.j2"),
    ("constraints", "constraints.j2"),
    ("compliance", "compliance.j2"),
    ("output_contract", "output_contract.j2"),
)

STEP_HEADER_RE = re.compile(r"^\s*STEP\s+([A-Za-z_][A-Za-z0-9_]*)\s*:?\s*$")


def _resolve_blocks(spec: WorkflowSpec, prompt_blocks: Sequence[PromptBlock]) -> List[PromptBlock]:
    by_tag = {block.domain_tag: block for block in prompt_blocks}
    resolved = []
    for tag in spec.compliance_tags:
        block = by_tag.get(tag)
        if block is None:
            raise UnknownComplianceTag(
                f"compliance tag '{tag}' has no prompt block", tag=tag, known=sorted(by_tag)
            )
        resolved.append(block)
    return resolved


def assemble_prompt(
    spec: WorkflowSpec,
    template: Template,
    modules: Sequence[ModuleBinding],
    prompt_blocks: Sequence[PromptBlock],
    renderer: Optional[PromptRenderer] = None,
) -> AssembledPrompt:
    """
    Generation prompt: task framing, schema, constraints, compliance blocks
    and the rule-language output contract, in that order.

    Raises:
        UnknownComplianceTag: a compliance tag without a prompt block
    """
    blocks = _resolve_blocks(spec, prompt_blocks)
    verdicts = template.verdict_set(spec.verdicts).to_dict()
    context = {
        "spec": spec,
        "template": template,
        "framing": template.scaffold.framing,
        "modules": list(modules),
        "blocks": blocks,
        "verdicts": list(verdicts.items()),
    }
    sections = render_sections(renderer or default_renderer(), PROMPT_SECTIONS, context)
    prompt = AssembledPrompt(
        sections=sections,
        metadata=metadata(fixture_key=spec.workflow_id, output_grammar=RULE_OUTPUT_GRAMMAR),
    )
    LOG.debug(f"Assembled generation prompt for {spec.workflow_id}: {prompt.digest[:12]}")
    return prompt


def generate_logic(
    client: GeneratorClient, prompt: AssembledPrompt, ledger: Optional[TokenLedger] = None
) -> Generation:
    """
    The one-time generation call.

    Raises:
        RoleViolation: client is not privileged
        ClientUnavailable: client transport failed
        EmptyGeneration: client returned no text
    """
    if client.role != ClientRole.PRIVILEGED:
        raise RoleViolation(
            f"compile needs a privileged client, got {client.role.value}",
            generator_id=client.generator_id,
        )
    generation = client.generate(prompt)
    if not generation.text or not generation.text.strip():
        raise EmptyGeneration(f"{client.generator_id} returned no logic text")
    if ledger is not None:
        ledger.record_generation(generation.input_tokens, generation.output_tokens)
    LOG.info(
        f"Generation by {generation.generator_id or client.generator_id}: "
        f"{generation.input_tokens} input / {generation.output_tokens} output tokens"
    )
    return generation


def split_generated_logic(text: str, spec: WorkflowSpec) -> Dict[str, str]:
    """
    Map each rule step to its chain text. Chains follow `STEP <name>`
    header lines; a workflow with one rule step may omit the header.

    Raises:
        SlotMismatch: headers name unknown or bounded steps, repeat, or miss a rule step
    """
    rule_names = [step.name for step in spec.rule_steps]
    chunks: Dict[str, List[str]] = {}
    preamble: List[str] = []
    current: Optional[List[str]] = None

    for line in text.splitlines():
        header = STEP_HEADER_RE.match(line)
        if header is None:
            (preamble if current is None else current).append(line)
            continue
        name = header.group(1)
        if name not in rule_names:
            step = spec.step(name)
            detail = "is a bounded step" if step is not None else "has no slot"
            raise SlotMismatch(f"generated logic for step '{name}' {detail}", step=name)
        if name in chunks:
            raise SlotMismatch(f"generated logic repeats step '{name}'", step=name)
        current = chunks[name] = []

    if not chunks:
        if len(rule_names) != 1:
            raise SlotMismatch(
                f"generated logic has no STEP headers but {len(rule_names)} rule steps need one",
                steps=rule_names,
            )
        return {rule_names[0]: text.strip()}

    stray = [line for line in preamble if line.strip() and not line.lstrip().startswith("#")]
    if stray:
        raise SlotMismatch("generated logic has text before the first STEP header")
    missing = [name for name in rule_names if name not in chunks]
    if missing:
        raise SlotMismatch(f"generated logic has no chain for {missing}", steps=missing)
    return {name: "\n".join(chunks[name]).strip() for name in rule_names}


def _compile_rule(text: str, verdicts) -> Tuple[str, Tuple[Tuple[str, str], ...]]:
    """Canonical text and aliases when the chain parses; raw text otherwise"""
    try:
        chain = parse_rule(text, verdicts)
    except RuleError:
        return text, ()
    return to_source(chain), tuple(chain.aliases)


def assemble_artifact(
    template: Template,
    modules: Sequence[ModuleBinding],
    logic: Union[str, Mapping[str, str]],
    spec: WorkflowSpec,
    prompt: Optional[AssembledPrompt] = None,
    generation: Optional[Generation] = None,
    regeneration_count: int = 0,
) -> CompiledArtifact:
    """
    Fill the template's slots with the generated logic.

    Logic that fails to parse is stored verbatim so the Syntax stage can
    report it.

    Raises:
        SlotMismatch: logic does not line up with the spec's rule steps
    """
    if isinstance(logic, str):
        logic = split_generated_logic(logic, spec)
    verdict_set = template.verdict_set(spec.verdicts)
    aliases: Dict[str, str] = {}
    steps = []
    for step in spec.steps:
        if step.is_bounded:
            steps.append(
                CompiledStep(
                    name=step.name,
                    step_type=step.step_type,
                    schema=step.schema,
                    validations=step.validations,
                    prompt_hint=step.prompt_hint,
                )
            )
            continue
        if step.name not in logic:
            raise SlotMismatch(f"no logic for rule step '{step.name}'", step=step.name)
        text, step_aliases = _compile_rule(logic[step.name], verdict_set)
        aliases.update(step_aliases)
        steps.append(CompiledStep(name=step.name, step_type=step.step_type, logic=text))

    extra = sorted(set(logic) - {step.name for step in spec.rule_steps})
    if extra:
        raise SlotMismatch(f"template '{template.id}' has no slot for {extra}", steps=extra)

    spec_document = serialize_spec(spec)
    provenance = Provenance(
        spec_digest=sha256_hex(spec_document),
        prompt_digest=prompt.digest if prompt is not None else "",
        generator_id=generation.generator_id if generation is not None else "",
        regeneration_count=regeneration_count,
        generation_input_tokens=generation.input_tokens if generation is not None else 0,
        generation_output_tokens=generation.output_tokens if generation is not None else 0,
    )
    artifact = CompiledArtifact(
        name=spec.name,
        workflow_id=spec.workflow_id,
        logic_version=spec.version,
        template_id=template.id,
        template_kind=template.kind.value,
        steps=tuple(steps),
        provenance=provenance,
        inputs=spec.inputs,
        modules=tuple(modules),
        verdicts=tuple(verdict_set.to_dict().items()),
        aliases=tuple(sorted(aliases.items())),
        scaffold=template.scaffold.to_dict(),
        spec_document=spec_document,
    )
    LOG.debug(f"Assembled artifact {artifact.workflow_id} ({len(steps)} steps)")
    return artifact
