"""
Run configuration for the command line.

Precedence, highest first: command-line flags, the --config file, the
environment (a .env file is read with python-dotenv), the defaults below.
"""

import dataclasses
import json
import os
import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, get_type_hints

import structlog
from dotenv import load_dotenv

from link_multiplicity.errors import ValidationError
from link_multiplicity.geometry import SLAB_METRICS
from link_multiplicity.harness import DEFAULT_MAX_SAMPLE_SIZE, SampleSizePolicy
from link_multiplicity.reports import decode_value, read_text

logger = structlog.get_logger(__name__)

ENV_OUTPUT_DIR = "LINK_MULTIPLICITY_OUTPUT_DIR"
ENV_LOG_LEVEL = "LINK_MULTIPLICITY_LOG_LEVEL"
CONFIG_KIND = "config"

SUBCOMMANDS = ("bound", "estimate", "trials", "certify", "sample")
FORMATS = {
    "bound": ("json", "text"),
    "estimate": ("json",),
    "trials": ("json", "csv", "plot"),
    "certify": ("json", "text"),
    "sample": ("csv",),
}
LOG_LEVELS = ("debug", "info", "warning", "error", "critical")
DEFAULT_SAMPLE_COUNT = 10_000
DEFAULT_EPSILON = 0.5
DEFAULT_INNER_RADIUS = 0.05


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    curve_id: str | None = None
    input: Path | None = None
    epsilon: float | None = None
    inner_radius: float | None = None
    delta: float | None = None
    gamma: float = 0.1
    alpha: float | None = None
    alpha_fraction: float = 0.9
    seed: int = 0
    trials: int = 100
    sample_size: int | None = None
    sample_multiplier: float | None = None
    max_sample_size: int = DEFAULT_MAX_SAMPLE_SIZE
    multipliers: tuple[float, ...] | None = None
    probe_density: int = 128
    slab_metric: str = "real"
    threads: int = 1
    direction: tuple[complex, ...] | None = None
    base: tuple[complex, ...] | None = None
    output: Path | None = None
    output_dir: Path | None = None
    format: str | None = None
    log_level: str = "warning"

    @property
    def resolved_epsilon(self) -> float:
        return self.epsilon if self.epsilon is not None else DEFAULT_EPSILON

    @property
    def resolved_inner_radius(self) -> float:
        return self.inner_radius if self.inner_radius is not None else DEFAULT_INNER_RADIUS

    @property
    def resolved_delta(self) -> float:
        return self.delta if self.delta is not None else self.resolved_epsilon / 4.0

    @property
    def resolved_format(self) -> str:
        return self.format or FORMATS[self.subcommand][0]

    @property
    def blind(self) -> bool:
        return self.input is not None

    def sample_size_policy(self) -> SampleSizePolicy:
        if self.sample_size is not None:
            return SampleSizePolicy(kind="fixed", count=self.sample_size, max_sample_size=self.max_sample_size)
        if self.sample_multiplier is not None:
            return SampleSizePolicy(
                kind="multiplier", multiplier=self.sample_multiplier, max_sample_size=self.max_sample_size
            )
        if self.subcommand == "estimate":
            return SampleSizePolicy(kind="fixed", count=DEFAULT_SAMPLE_COUNT, max_sample_size=self.max_sample_size)
        return SampleSizePolicy(kind="bound", max_sample_size=self.max_sample_size)

    def output_path(self) -> Path | None:
        """--output as given, else a file named after the run inside the output directory, else stdout (None)."""
        if self.output is not None:
            return self.output
        if self.output_dir is None:
            return None
        subject = self.curve_id or (self.input.stem if self.input else "run")
        extension = {"text": "txt", "plot": "csv"}.get(self.resolved_format, self.resolved_format)
        return self.output_dir / f"{self.subcommand}-{subject}-{self.seed}.{extension}"

    def _mode_violations(self) -> list[str]:
        v = []
        if self.curve_id is not None and self.input is not None:
            v.append("curve and input are mutually exclusive")
        if self.input is not None and self.subcommand != "estimate":
            v.append(f"input point clouds are only accepted by estimate, not {self.subcommand}")
        if self.curve_id is None and self.input is None:
            wanted = "a curve or an input point cloud" if self.subcommand == "estimate" else "a curve"
            v.append(f"{self.subcommand} needs {wanted}")
        if self.blind:
            missing = [name for name in ("alpha", "delta", "direction", "base") if getattr(self, name) is None]
            if missing:
                v.append(f"blind mode needs explicit {', '.join(missing)}")
        return v

    def _range_violations(self) -> list[str]:
        allowed = FORMATS[self.subcommand]
        checks = [
            (self.format is None or self.format in allowed, f"format={self.format!r} must be one of {allowed}"),
            (self.slab_metric in SLAB_METRICS, f"slab_metric={self.slab_metric!r} must be one of {SLAB_METRICS}"),
            (self.log_level in LOG_LEVELS, f"log_level={self.log_level!r} must be one of {LOG_LEVELS}"),
            (self.resolved_epsilon > 0.0, f"epsilon={self.resolved_epsilon} must be positive"),
            (
                0.0 < self.resolved_inner_radius < self.resolved_epsilon,
                f"inner_radius={self.resolved_inner_radius} must lie in (0, epsilon)",
            ),
            (
                self.delta is None or self.blind or self.resolved_inner_radius < self.delta < self.resolved_epsilon,
                f"delta={self.delta} must lie strictly between inner_radius and epsilon",
            ),
            (0.0 < self.gamma < 1.0, f"gamma={self.gamma} must lie in (0, 1)"),
            (self.alpha is None or self.alpha > 0.0, f"alpha={self.alpha} must be positive"),
            (0.0 < self.alpha_fraction < 1.0, f"alpha_fraction={self.alpha_fraction} must lie in (0, 1)"),
            (self.trials >= 1, f"trials={self.trials} must be >= 1"),
            (self.sample_size is None or self.sample_size >= 1, f"sample_size={self.sample_size} must be >= 1"),
            (
                self.sample_multiplier is None or self.sample_multiplier > 0.0,
                f"sample_multiplier={self.sample_multiplier} must be positive",
            ),
            (
                self.multipliers is None or (bool(self.multipliers) and min(self.multipliers) > 0.0),
                "multipliers must be a non-empty list of positive numbers",
            ),
            (self.max_sample_size >= 1, f"max_sample_size={self.max_sample_size} must be >= 1"),
            (self.probe_density >= 8, f"probe_density={self.probe_density} must be >= 8"),
            (self.threads >= 1, f"threads={self.threads} must be >= 1"),
        ]
        return [message for ok, message in checks if not ok]

    def validate(self) -> "RunConfig":
        """Check every field at once; raises ValidationError naming each violation."""
        if self.subcommand not in SUBCOMMANDS:
            raise ValidationError("Invalid configuration", [f"subcommand={self.subcommand!r} not in {SUBCOMMANDS}"])
        violations = self._mode_violations() + self._range_violations()
        if violations:
            raise ValidationError("Invalid configuration", violations)
        return self


def _field_values(data: dict[str, Any], source: str) -> dict[str, Any]:
    hints = get_type_hints(RunConfig)
    names = {f.name for f in dataclasses.fields(RunConfig)} - {"subcommand"}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValidationError(f"Unknown configuration keys in {source}", unknown)
    values = {}
    for name, raw in data.items():
        try:
            values[name] = decode_value(hints[name], raw)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"Bad configuration value in {source}", [f"{name}: {e}"]) from e
    return values


def read_config_file(path: Path | str) -> dict[str, Any]:
    """
    Settings from a config file: a TOML file with a [run] table, or a JSON
    document {"kind": "config", "config": {...}} in the report schema.
    """
    path = Path(path)
    text = read_text(path)
    if path.suffix == ".toml":
        try:
            data = tomllib.loads(text).get("run", {})
        except tomllib.TOMLDecodeError as e:
            raise ValidationError(f"Malformed config file {path}", [str(e)]) from e
    else:
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"Malformed config file {path}", [str(e)]) from e
        if not isinstance(document, dict) or document.get("kind") != CONFIG_KIND:
            raise ValidationError(f"Config file {path} must be a {CONFIG_KIND!r} document")
        data = document.get(CONFIG_KIND, {})
    if not isinstance(data, dict):
        raise ValidationError(f"Config file {path} must hold a table of settings")
    return _field_values(data, str(path))


def environment_values() -> dict[str, Any]:
    load_dotenv()
    values: dict[str, Any] = {}
    if output_dir := os.getenv(ENV_OUTPUT_DIR):
        values["output_dir"] = Path(output_dir)
    if log_level := os.getenv(ENV_LOG_LEVEL):
        values["log_level"] = log_level.lower()
    return values


def load_config(subcommand: str, flags: dict[str, Any], config_path: Path | str | None = None) -> RunConfig:
    """
    Merge defaults, environment, config file and flags, then validate.

    Args:
        subcommand: One of SUBCOMMANDS
        flags: Values given on the command line; None entries are ignored
        config_path: Optional config file
    """
    values = environment_values()
    if config_path is not None:
        values.update(read_config_file(config_path))
    values.update({k: v for k, v in flags.items() if v is not None})
    config = RunConfig(subcommand=subcommand, **values).validate()
    logger.debug("Configuration loaded", subcommand=subcommand, config_file=str(config_path) if config_path else None)
    return config
