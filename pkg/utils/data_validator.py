"""
data_validator.py
─────────────────
Resolve and validate a RunConfig from a TOML file and command-line flags.

Precedence: RunConfig defaults < file values < flags. A file holds top-level
RunConfig keys and an optional [model] table of ModelParams keys; model keys
may also appear at the top level (`lambda = 3`). Unknown keys are rejected.
"""

import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

from pydantic import ValidationError

from core.exceptions import ConfigError
from core.models import Integrator, ModelParams, RunConfig, Subcommand

logger = logging.getLogger(__name__)

MODEL_KEYS = frozenset(
    {name for name in ModelParams.model_fields} | {f.alias for f in ModelParams.model_fields.values() if f.alias}
)
RUN_KEYS = frozenset(RunConfig.model_fields) - {"model"}

# argparse destination → config key, where the two differ
FLAG_KEYS = {
    "lam": "lambda",
    "dir": "report_dir",
    "out": "out_dir",
    "nonlinearity": "pde_nonlinearity",
}


@dataclass
class ValidationResult:
    """Result of validation"""
    is_valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    config: Optional[RunConfig] = None
    error_key: Optional[str] = None


class ConfigValidator:
    """Merge file and flag values into a RunConfig."""

    @staticmethod
    def load_file(path: Optional[str]) -> Dict[str, Any]:
        """
        Read a TOML configuration file

        Args:
            path: file path, or None for an empty configuration

        Returns:
            Nested dictionary of raw values
        """
        if not path:
            return {}
        try:
            with open(path, "rb") as fh:
                return tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found", key="config") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}", key="config") from exc

    @staticmethod
    def split_keys(values: Mapping[str, Any]) -> Dict[str, Any]:
        """Move top-level model keys into the `model` table and reject unknown keys."""
        run: Dict[str, Any] = {}
        model: Dict[str, Any] = dict(values.get("model") or {})
        for key, value in values.items():
            if key == "model":
                continue
            if key in MODEL_KEYS:
                model[key] = value
            elif key in RUN_KEYS:
                run[key] = value
            else:
                raise ConfigError(f"unknown configuration key '{key}'", key=key)
        for key in model:
            if key not in MODEL_KEYS:
                raise ConfigError(f"unknown model key '{key}'", key=f"model.{key}")
        if model:
            run["model"] = model
        return run

    @staticmethod
    def merge(file_values: Mapping[str, Any], flag_values: Mapping[str, Any]) -> Dict[str, Any]:
        """Flags override file values; the model table is merged key by key."""
        merged = dict(file_values)
        for key, value in flag_values.items():
            if key == "model":
                merged["model"] = {**merged.get("model", {}), **value}
            else:
                merged[key] = value
        return merged

    @staticmethod
    def _apply_defaults(values: Dict[str, Any]) -> Dict[str, Any]:
        # plain simulations measure the second-order splitting unless told otherwise
        if values.get("subcommand") == Subcommand.SIMULATE.value and "integrator" not in values:
            values["integrator"] = Integrator.STRANG.value
        return values

    def validate(self, file_values: Mapping[str, Any], flag_values: Mapping[str, Any]) -> ValidationResult:
        """
        Validate merged configuration values

        Args:
            file_values: raw values read from the config file
            flag_values: values given on the command line

        Returns:
            ValidationResult with the resolved config or the first offending key
        """
        try:
            values = self.merge(self.split_keys(file_values), self.split_keys(flag_values))
        except ConfigError as exc:
            return ValidationResult(False, errors=[str(exc)], error_key=exc.key)
        values = self._apply_defaults(values)
        try:
            config = RunConfig.model_validate(values)
        except ValidationError as exc:
            errors = [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()]
            first = exc.errors()[0]["loc"] if exc.errors() else ()
            return ValidationResult(False, errors=errors, error_key=".".join(str(p) for p in first) or None)
        warnings = []
        if config.sweep and config.subcommand != Subcommand.WAVE:
            warnings.append(f"sweep only applies to the wave subcommand, ignored for {config.subcommand.value}")
        if config.long_run and config.subcommand != Subcommand.JUSTIFY:
            warnings.append(f"long_run only applies to the justify subcommand, ignored for {config.subcommand.value}")
        return ValidationResult(True, warnings=warnings, config=config)


def flags_from_namespace(namespace: Any) -> Dict[str, Any]:
    """Non-None argparse values keyed by config name (lists become tuples)."""
    values: Dict[str, Any] = {}
    for dest, value in vars(namespace).items():
        if value is None or dest in ("config", "print_config", "verbose"):
            continue
        if isinstance(value, list):
            value = tuple(value)
        values[FLAG_KEYS.get(dest, dest)] = value
    return values


def parse_and_validate(namespace: Any) -> RunConfig:
    """Resolve the RunConfig of one CLI invocation; ConfigError names the offending key."""
    validator = ConfigValidator()
    result = validator.validate(validator.load_file(getattr(namespace, "config", None)),
                                flags_from_namespace(namespace))
    if not result.is_valid:
        raise ConfigError("; ".join(result.errors), key=result.error_key)
    for warning in result.warnings:
        logger.warning(warning)
    return result.config
