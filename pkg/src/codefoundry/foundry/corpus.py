#!/usr/bin/env python3
"""
CodeFoundry - Benign Workflow Corpus
Shipped workflows with recorded generation text and golden cases, used as
the benign half of the fault matrix and as benign code for gate
false-positive measurement.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import yaml

from ..artifact import CompiledArtifact
from ..errors import FoundryError, LibraryError
from ..library import Libraries, default_libraries
from ..resources import get_data_path
from ..specmodel import WorkflowSpec, parse_spec
from ..validator import GoldenCase
from .assembly import assemble_artifact
from .selection import select_modules, select_template

LOG = logging.getLogger("CodeFoundry.foundry")

CORPUS_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BenignWorkflow:
    spec: WorkflowSpec
    generation: str
    golden: Tuple[GoldenCase, ...]

    def build(self, libraries: Optional[Libraries] = None) -> CompiledArtifact:
        """Artifact assembled from the recorded generation, sealed without validation"""
        libraries = libraries or default_libraries()
        template = select_template(self.spec, libraries.templates)
        modules = select_modules(template, libraries.modules)
        return assemble_artifact(template, modules, self.generation, self.spec).sealed()


def load_benign_workflows(path: Optional[Union[str, Path]] = None) -> List[BenignWorkflow]:
    path = Path(path) if path else get_data_path("corpus", "benign_workflows.yaml")
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise LibraryError(f"Cannot read workflow corpus {path}: {e}") from None
    if document.get("format_version") != CORPUS_FORMAT_VERSION:
        raise LibraryError(f"{path}: unsupported format_version {document.get('format_version')!r}")

    workflows = []
    for index, entry in enumerate(document.get("workflows") or []):
        try:
            spec = parse_spec(yaml.safe_dump(entry["spec"], sort_keys=False))
            golden = tuple(
                GoldenCase.from_dict(case, case_id=f"{index}-{n}")
                for n, case in enumerate(entry["golden"], start=1)
            )
            workflows.append(BenignWorkflow(spec, str(entry["generation"]), golden))
        except (KeyError, TypeError, ValueError, FoundryError) as e:
            raise LibraryError(f"{path}: workflow entry {index} is invalid: {e}") from None
    LOG.debug(f"Loaded {len(workflows)} benign workflows from {path}")
    return workflows


def benign_corpus(
    libraries: Optional[Libraries] = None, path: Optional[Union[str, Path]] = None
) -> List[Tuple[CompiledArtifact, Tuple[GoldenCase, ...]]]:
    """(artifact, golden) pairs for every benign workflow"""
    return [(w.build(libraries), w.golden) for w in load_benign_workflows(path)]
