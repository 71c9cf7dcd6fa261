"""Pipeline configuration and its YAML/JSON file form.

Example (YAML)::

    max_fsm_attempts: 3
    compile_rounds: 1
    security_rounds: 1
    security_threshold: medium
    artifact_root: artifacts
    parallel_runs: 1
    backend:
      kind: scripted-mock
      script: script.json
    toolchain:
      mode: playback
      fixtures_dir: fixtures
    validator:
      cycle_rule: error
    prompts:
      budget: 12000

Relative paths are resolved against the directory holding the file.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .gateway import BackendConfig, ConfigError
from .scoring import SEVERITY_RANK
from .toolchain import ToolchainConfig
from .validate import ValidatorConfig

CONFIG_ENV = "FSMSCG_CONFIG"


@dataclass
class PipelineConfig:
    backend: BackendConfig
    max_fsm_attempts: int = 3
    compile_rounds: int = 1
    security_rounds: int = 1
    security_threshold: str = "medium"
    artifact_root: Path = Path("artifacts")
    parallel_runs: int = 1
    fresh_session_per_stage: bool = False
    template_dir: Path | None = None
    prompt_budget: int = 12_000
    count_informational: bool = False
    validator: ValidatorConfig = field(default_factory=ValidatorConfig)
    toolchain: ToolchainConfig = field(default_factory=ToolchainConfig)

    def __post_init__(self):
        if self.max_fsm_attempts < 1:
            raise ConfigError("max_fsm_attempts must be >= 1")
        if self.compile_rounds < 0 or self.security_rounds < 0:
            raise ConfigError("feedback rounds must be >= 0")
        if self.parallel_runs < 1:
            raise ConfigError("parallel_runs must be >= 1")
        if self.security_threshold not in SEVERITY_RANK:
            raise ConfigError(f"security_threshold must be one of {sorted(SEVERITY_RANK)}")
        self.artifact_root = Path(self.artifact_root)
        if self.template_dir is not None:
            self.template_dir = Path(self.template_dir)

    def replace(self, **changes: Any) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def _resolve(base: Path, value: Any) -> Any:
    if value is None:
        return None
    p = Path(os.path.expanduser(str(value)))
    return p if p.is_absolute() else base / p


def _section(data: dict, name: str) -> dict:
    value = data.pop(name, None) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return dict(value)


def config_from_dict(data: dict, base_dir: Path = Path(".")) -> PipelineConfig:
    data = dict(data)
    backend = _section(data, "backend")
    toolchain = _section(data, "toolchain")
    validator = _section(data, "validator")
    prompts = _section(data, "prompts")
    try:
        if "script" in backend:
            backend["script"] = _resolve(base_dir, backend["script"])
        if "backoff" in backend:
            backend["backoff"] = tuple(backend["backoff"])
        if "fixtures_dir" in toolchain:
            toolchain["fixtures_dir"] = _resolve(base_dir, toolchain["fixtures_dir"])
        if "template_dir" in prompts:
            data["template_dir"] = _resolve(base_dir, prompts.pop("template_dir"))
        if "budget" in prompts:
            data["prompt_budget"] = prompts.pop("budget")
        if prompts:
            raise ConfigError(f"unknown prompts keys {sorted(prompts)}")
        for key in ("artifact_root", "template_dir"):
            if key in data:
                data[key] = _resolve(base_dir, data[key])
        return PipelineConfig(
            backend=BackendConfig(**backend),
            validator=ValidatorConfig(**validator),
            toolchain=ToolchainConfig(**toolchain),
            **data,
        )
    except TypeError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: Path | str | None = None) -> PipelineConfig:
    """Read a YAML or JSON config from *path*, or from ``$FSMSCG_CONFIG``."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
        if not path:
            raise ConfigError(f"no config file given (use --config or {CONFIG_ENV})")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return config_from_dict(data, path.parent)
