#!/usr/bin/env python3
"""
CodeFoundry - Foundry Module
Template and module selection, prompt assembly, one-time generation,
artifact assembly and the validate/regenerate compile loop.
"""

from .assembly import (
    PROMPT_SECTIONS,
    assemble_artifact,
    assemble_prompt,
    generate_logic,
    split_generated_logic,
)
from .compiler import (
    DEFAULT_MAX_REGENERATIONS,
    CodeFoundry,
    CompileAttempt,
    CompilePolicy,
    CompileResult,
    build_client,
    compile_workflow,
)
from .corpus import BenignWorkflow, benign_corpus, load_benign_workflows
from .selection import select_modules, select_template

__all__ = [
    "DEFAULT_MAX_REGENERATIONS",
    "PROMPT_SECTIONS",
    "BenignWorkflow",
    "CodeFoundry",
    "CompileAttempt",
    "CompilePolicy",
    "CompileResult",
    "assemble_artifact",
    "assemble_prompt",
    "benign_corpus",
    "build_client",
    "compile_workflow",
    "generate_logic",
    "load_benign_workflows",
    "select_modules",
    "select_template",
    "split_generated_logic",
]
