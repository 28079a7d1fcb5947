#!/usr/bin/env python3
"""
CodeFoundry - Application Setup
Logging configuration and the configuration-to-foundry wiring shared by
every CLI command.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .config import ConfigManager
from .errors import UsageError
from .foundry import CodeFoundry

LOG = logging.getLogger("CodeFoundry.app")


def setup_logging(level: str = "INFO") -> None:
    """Configure root logging once; later calls only change the level"""
    log_level = getattr(logging, str(level).upper(), logging.INFO)
    root = logging.getLogger()
    if root.handlers:
        root.setLevel(log_level)
    else:
        logging.basicConfig(
            level=log_level,
            format="%(asctime)s %(name)s %(levelname)s %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
    LOG.debug(f"Logging configured at {str(level).upper()} level")


def load_configuration(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Dict[str, Any]]] = None,
) -> ConfigManager:
    """
    Build the effective configuration: file, environment, then command-line
    overrides given as {section: {key: value}}; None values are ignored.

    Raises:
        UsageError: the configuration does not validate
    """
    manager = ConfigManager(config_file)
    for section, values in (overrides or {}).items():
        target = manager.global_config if section == "global" else getattr(
            manager.global_config, section
        )
        for key, value in values.items():
            if value is not None:
                setattr(target, key, value)

    errors = manager.validate_config()
    if errors:
        for error in errors:
            LOG.error(f"Configuration error: {error}")
        raise UsageError("configuration is invalid", problems=errors)
    return manager


def create_foundry(manager: ConfigManager) -> CodeFoundry:
    setup_logging(manager.global_config.log_level)
    foundry = CodeFoundry(manager.global_config)
    LOG.debug(f"Foundry ready: client mode {manager.global_config.client.mode}")
    return foundry
