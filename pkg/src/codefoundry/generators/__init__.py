#!/usr/bin/env python3
"""
CodeFoundry - Generator Module
Pluggable generator clients selected by `client.mode`
"""

import logging
from typing import Any, Dict, Type

from .base import ClientRole, GeneratorClient, Generation, estimate_tokens
from .http import HttpGenerator
from .mock import (
    FaultGenerator,
    FaultKind,
    FixtureGenerator,
    FixtureResponse,
    ScriptedGenerator,
    corrupt,
)

LOG = logging.getLogger("CodeFoundry.generators")

# Generator registry - maps client.mode strings to client classes
_GENERATOR_REGISTRY: Dict[str, Type[GeneratorClient]] = {}

SUPPORTED_MODES = ["fixture", "scripted", "fault", "http"]


def register_generator(mode: str, client_class: Type[GeneratorClient]) -> None:
    """
    Register a generator client class.

    Args:
        mode: Client mode identifier (e.g., 'fixture')
        client_class: GeneratorClient subclass to register
    """
    if mode in _GENERATOR_REGISTRY:
        LOG.warning(f"Overwriting existing generator registration for '{mode}'")
    _GENERATOR_REGISTRY[mode] = client_class
    LOG.debug(f"Registered generator client: {mode} -> {client_class.__name__}")


def get_generator_class(mode: str) -> Type[GeneratorClient]:
    """
    Get a generator client class by mode.

    Raises:
        ValueError: If the mode is not registered
    """
    if mode not in _GENERATOR_REGISTRY:
        available = list(_GENERATOR_REGISTRY.keys())
        raise ValueError(f"Unknown client mode: '{mode}'. Available modes: {available}")
    return _GENERATOR_REGISTRY[mode]


def create_generator(mode: str, *args: Any, **kwargs: Any) -> GeneratorClient:
    return get_generator_class(mode)(*args, **kwargs)


def is_mode_supported(mode: str) -> bool:
    return mode in _GENERATOR_REGISTRY


register_generator("fixture", FixtureGenerator)
register_generator("scripted", ScriptedGenerator)
register_generator("fault", FaultGenerator)
register_generator("http", HttpGenerator)

__all__ = [
    "SUPPORTED_MODES",
    "ClientRole",
    "FaultGenerator",
    "FaultKind",
    "FixtureGenerator",
    "FixtureResponse",
    "Generation",
    "GeneratorClient",
    "HttpGenerator",
    "ScriptedGenerator",
    "corrupt",
    "create_generator",
    "estimate_tokens",
    "get_generator_class",
    "is_mode_supported",
    "register_generator",
]
