"""
CodeFoundry - Compile-once Workflow Foundry

Turns YAML workflow specifications into validated, deterministic artifacts.
A generator model is called once at compile time to produce decision logic
in a closed rule language; a four-stage validation pipeline and three
security gates guard the artifact, and a deterministic executor runs it
with full audit trails.
"""

__version__ = "1.0.0"
__author__ = "CodeFoundry Team"
__license__ = "MIT"

# Package-level imports for convenience
from .artifact import CompiledArtifact
from .config import ConfigManager, GlobalConfig
from .errors import FoundryError
from .executor import WorkflowExecutor, replay, run_workflow
from .foundry import CodeFoundry, compile_workflow
from .specmodel import WorkflowSpec, parse_spec, validate_spec

__all__ = [
    "__version__",
    "CodeFoundry",
    "CompiledArtifact",
    "ConfigManager",
    "FoundryError",
    "GlobalConfig",
    "WorkflowExecutor",
    "WorkflowSpec",
    "compile_workflow",
    "parse_spec",
    "replay",
    "run_workflow",
    "validate_spec",
]
