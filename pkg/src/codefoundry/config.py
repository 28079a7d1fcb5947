#!/usr/bin/env python3
"""
CodeFoundry - Configuration Management Module
YAML configuration with .env and CODEFOUNDRY_* environment overrides
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

try:
    from dotenv import load_dotenv

    DOTENV_OK = True
except ImportError:
    DOTENV_OK = False

from .generators import SUPPORTED_MODES, FaultKind
from .secgates import DEFAULT_PII_CATEGORIES, GateAction, GatePolicy, Severity
from .storage import atomic_write_text
from .validator import DEFAULT_ACCURACY_THRESHOLD, ValidationStage

LOG = logging.getLogger("CodeFoundry.config")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class ClientConfig:
    """Generator client selection; `mode` picks the registered client class"""

    mode: str = "fixture"
    fixtures_path: Optional[str] = None  # None = shipped generation fixtures
    script_path: Optional[str] = None
    endpoint: str = ""
    api_key: str = ""
    model: str = "default"
    timeout: float = 60.0
    verify_ssl: bool = True
    ca_bundle_path: Optional[str] = None
    fault_kind: str = FaultKind.UNKNOWN_VERDICT.value
    faulty_calls: Optional[int] = None


@dataclass
class CompileConfig:
    max_regenerations: int = 3
    libraries_path: Optional[str] = None
    golden_dir: Optional[str] = None
    output_dir: str = "./artifacts"


@dataclass
class ValidationConfig:
    accuracy_threshold: float = DEFAULT_ACCURACY_THRESHOLD
    disabled_stages: List[str] = field(default_factory=list)
    workers: int = 1


@dataclass
class RuntimeConfig:
    maximum_attempts: int = 3
    repetitions: int = 1000
    drift_window: int = 50
    drift_threshold: float = 0.2
    audit_database_path: Optional[str] = None
    workers: int = 1


@dataclass
class GateConfig:
    injection_action: str = GateAction.BLOCK.value
    pii_action: str = GateAction.REDACT.value
    blob_action: str = GateAction.FLAG.value
    code_block_severity: str = Severity.HIGH.value
    pii_categories: List[str] = field(default_factory=lambda: list(DEFAULT_PII_CATEGORIES))
    blob_threshold: int = 120
    rules_path: Optional[str] = None

    def to_policy(self) -> GatePolicy:
        return GatePolicy(
            injection_action=self.injection_action,
            pii_action=self.pii_action,
            blob_action=self.blob_action,
            code_block_severity=self.code_block_severity,
            pii_categories=tuple(self.pii_categories),
            blob_threshold=self.blob_threshold,
        )


@dataclass
class GlobalConfig:
    """Top-level configuration; one attribute per YAML section"""

    log_level: str = "INFO"
    client: ClientConfig = None
    compile: CompileConfig = None
    validation: ValidationConfig = None
    runtime: RuntimeConfig = None
    gates: GateConfig = None

    def __post_init__(self):
        if self.client is None:
            self.client = ClientConfig()
        if self.compile is None:
            self.compile = CompileConfig()
        if self.validation is None:
            self.validation = ValidationConfig()
        if self.runtime is None:
            self.runtime = RuntimeConfig()
        if self.gates is None:
            self.gates = GateConfig()

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        log_level = data.pop("log_level")
        return {"global": {"log_level": log_level}, **data}


SECTIONS = {
    "client": ClientConfig,
    "compile": CompileConfig,
    "validation": ValidationConfig,
    "runtime": RuntimeConfig,
    "gates": GateConfig,
}

# environment variable -> (section, key, converter); section None = global
ENV_OVERRIDES = {
    "CODEFOUNDRY_LOG_LEVEL": (None, "log_level", str),
    "CODEFOUNDRY_CLIENT_MODE": ("client", "mode", str),
    "CODEFOUNDRY_FIXTURES_PATH": ("client", "fixtures_path", str),
    "CODEFOUNDRY_CLIENT_ENDPOINT": ("client", "endpoint", str),
    "CODEFOUNDRY_CLIENT_API_KEY": ("client", "api_key", str),
    "CODEFOUNDRY_CLIENT_MODEL": ("client", "model", str),
    "CODEFOUNDRY_CLIENT_TIMEOUT": ("client", "timeout", float),
    "CODEFOUNDRY_MAX_REGENERATIONS": ("compile", "max_regenerations", int),
    "CODEFOUNDRY_LIBRARIES_PATH": ("compile", "libraries_path", str),
    "CODEFOUNDRY_GOLDEN_DIR": ("compile", "golden_dir", str),
    "CODEFOUNDRY_ACCURACY_THRESHOLD": ("validation", "accuracy_threshold", float),
    "CODEFOUNDRY_MAXIMUM_ATTEMPTS": ("runtime", "maximum_attempts", int),
    "CODEFOUNDRY_AUDIT_DB": ("runtime", "audit_database_path", str),
    "CODEFOUNDRY_RULES_PATH": ("gates", "rules_path", str),
}


class ConfigManager:
    """Loads configuration: file, then environment; CLI flags are applied by the caller"""

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        self.config_file = Path(config_file) if config_file else None
        self.global_config = GlobalConfig()
        self.load_errors: List[str] = []

        if DOTENV_OK:
            load_dotenv()

        self._load_config()

    def _load_config(self):
        if self.config_file is not None and self.config_file.exists():
            self._load_from_yaml()
        elif self.config_file is not None:
            LOG.warning(f"Config file {self.config_file} not found, using defaults")
        self._load_from_env()

    def _load_from_yaml(self):
        """Load configuration sections from the YAML file"""
        try:
            with open(self.config_file, "r") as f:
                data = yaml.safe_load(f) or {}
            if not isinstance(data, dict):
                raise ValueError("document root must be a mapping")

            global_data = data.get("global") or {}
            if "log_level" in global_data:
                self.global_config.log_level = str(global_data["log_level"])

            for section, section_class in SECTIONS.items():
                section_data = data.get(section) or {}
                if not isinstance(section_data, dict):
                    raise ValueError(f"section '{section}' must be a mapping")
                known = {f.name for f in fields(section_class)}
                unknown = sorted(set(section_data) - known)
                if unknown:
                    self.load_errors.append(f"{section}: unknown keys {unknown}")
                values = {k: v for k, v in section_data.items() if k in known}
                setattr(self.global_config, section, section_class(**values))

            LOG.info(f"Loaded configuration from {self.config_file}")

        except (OSError, yaml.YAMLError, ValueError, TypeError) as e:
            LOG.error(f"Failed to load config from {self.config_file}: {e}")
            self.load_errors.append(f"{self.config_file}: {e}")

    def _load_from_env(self):
        """Overlay CODEFOUNDRY_* environment variables"""
        for variable, (section, key, convert) in ENV_OVERRIDES.items():
            raw = os.getenv(variable)
            if raw is None or raw == "":
                continue
            try:
                value = convert(raw)
            except ValueError:
                self.load_errors.append(f"{variable}: cannot convert {raw!r}")
                continue
            target = self.global_config if section is None else getattr(self.global_config, section)
            setattr(target, key, value)
            LOG.debug(f"Config {section or 'global'}.{key} set from {variable}")

    def validate_config(self) -> List[str]:
        """Validate configuration and return list of errors"""
        errors = list(self.load_errors)
        cfg = self.global_config

        if str(cfg.log_level).upper() not in LOG_LEVELS:
            errors.append(f"Invalid log_level '{cfg.log_level}': must be one of {list(LOG_LEVELS)}")

        if cfg.client.mode not in SUPPORTED_MODES:
            errors.append(f"client.mode must be one of {SUPPORTED_MODES}")
        if cfg.client.mode == "http" and not cfg.client.endpoint:
            errors.append("client.endpoint is required when client.mode is http")
        if cfg.client.mode == "scripted" and not cfg.client.script_path:
            errors.append("client.script_path is required when client.mode is scripted")
        if cfg.client.fault_kind not in {kind.value for kind in FaultKind}:
            errors.append(f"client.fault_kind '{cfg.client.fault_kind}' is not a known fault")
        if cfg.client.timeout <= 0:
            errors.append("client.timeout must be > 0")

        if cfg.compile.max_regenerations < 0:
            errors.append("compile.max_regenerations must be >= 0")

        if not 0 < cfg.validation.accuracy_threshold <= 1:
            errors.append("validation.accuracy_threshold must be in (0, 1]")
        stages = {stage.value for stage in ValidationStage}
        for stage in cfg.validation.disabled_stages:
            if stage not in stages:
                errors.append(f"validation.disabled_stages: unknown stage '{stage}'")
        if cfg.validation.workers < 1:
            errors.append("validation.workers must be >= 1")

        if cfg.runtime.maximum_attempts < 1:
            errors.append("runtime.maximum_attempts must be >= 1")
        if cfg.runtime.repetitions < 1:
            errors.append("runtime.repetitions must be >= 1")
        if cfg.runtime.drift_window < 1:
            errors.append("runtime.drift_window must be >= 1")
        if not 0 <= cfg.runtime.drift_threshold <= 1:
            errors.append("runtime.drift_threshold must be in [0, 1]")
        if cfg.runtime.workers < 1:
            errors.append("runtime.workers must be >= 1")

        try:
            self.to_gate_policy()
        except ValueError as e:
            errors.append(f"gates: {e}")

        return errors

    def to_gate_policy(self) -> GatePolicy:
        return self.global_config.gates.to_policy()

    def save_config(self, path: Optional[Union[str, Path]] = None) -> Path:
        """Write the effective configuration as YAML"""
        target = Path(path) if path else self.config_file
        if target is None:
            raise ValueError("no config file path to save to")
        text = yaml.dump(self.global_config.to_dict(), default_flow_style=False, sort_keys=False)
        atomic_write_text(target, text)
        LOG.info(f"Configuration saved to {target}")
        return target


def create_example_config() -> str:
    """Create an annotated example configuration file"""
    return """# CodeFoundry Configuration
# Precedence: command-line flags > CODEFOUNDRY_* environment > this file > defaults

global:
  log_level: "INFO"

client:
  # fixture | scripted | fault | http
  mode: "fixture"
  # fixtures_path: "./fixtures/generation_fixtures.yaml"  # default: shipped fixtures
  # script_path: "./fixtures/script.yaml"                 # scripted mode: ordered responses
  endpoint: ""            # http mode: generator service base URL
  api_key: ""             # prefer CODEFOUNDRY_CLIENT_API_KEY in .env
  model: "default"
  timeout: 60.0
  verify_ssl: true
  fault_kind: "unknown_verdict"   # fault mode: corruption applied to fixture output
  # faulty_calls: 1               # fault mode: corrupt only the first N calls

compile:
  max_regenerations: 3
  # libraries_path: "./library"   # templates.yaml, modules.yaml, prompt_blocks.yaml
  # golden_dir: "./golden"        # <workflow_id>.jsonl golden sets
  output_dir: "./artifacts"

validation:
  accuracy_threshold: 0.95
  disabled_stages: []             # ablation: security, syntax, execution, accuracy
  workers: 1

runtime:
  maximum_attempts: 3
  repetitions: 1000
  drift_window: 50
  drift_threshold: 0.2
  # audit_database_path: "./data/audit.db"
  workers: 1

gates:
  injection_action: "block"       # block | flag
  pii_action: "redact"            # redact | block
  blob_action: "flag"             # block | flag
  code_block_severity: "high"     # low | medium | high | critical
  pii_categories: ["ssn", "email", "phone", "mrn"]
  blob_threshold: 120
  # rules_path: "./security_rules.yaml"
"""
