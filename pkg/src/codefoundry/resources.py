"""
Resource discovery for CodeFoundry package data (libraries, prompt templates)

This module provides functions to locate the shipped YAML libraries, the
Jinja2 prompt templates and the sample workflows whether CodeFoundry is
installed via pip or running from source.
"""

from pathlib import Path
from typing import List, Optional


def get_package_path() -> Path:
    """Get the path to the installed codefoundry package"""
    return Path(__file__).parent


def get_templates_path() -> Path:
    """
    Get the path to the Jinja2 prompt templates directory.

    Returns:
        Path to templates directory

    Raises:
        FileNotFoundError: If templates directory cannot be found
    """
    pkg_templates = get_package_path() / "templates"
    if pkg_templates.exists():
        return pkg_templates

    raise FileNotFoundError(
        "Templates directory not found. "
        "Ensure package is installed correctly with: pip install codefoundry"
    )


def get_data_path(*parts: str) -> Path:
    """
    Get the path to a shipped data file (libraries, rule corpus, workflows).

    Args:
        parts: Path components below the data directory

    Returns:
        Path to the requested file or directory

    Raises:
        FileNotFoundError: If the data file cannot be found
    """
    path = get_package_path() / "data"
    for part in parts:
        path = path / part
    if not path.exists():
        raise FileNotFoundError(f"Package data not found: {path}")
    return path


def get_default_config_paths() -> List[Path]:
    """
    Get the default configuration file search paths.

    Returns:
        List of paths to search for config files, in priority order
    """
    return [
        Path("codefoundry.yaml"),
        Path.home() / ".config" / "codefoundry" / "config.yaml",
        Path("/etc/codefoundry/config.yaml"),
    ]


def find_config_file(specified: Optional[str] = None) -> Optional[Path]:
    """
    Find configuration file from specified path or search defaults.

    Args:
        specified: Explicit config path (if provided, used directly)

    Returns:
        Path to configuration file, or None when no default exists
    """
    if specified:
        return Path(specified)

    for path in get_default_config_paths():
        if path.exists():
            return path

    return None
