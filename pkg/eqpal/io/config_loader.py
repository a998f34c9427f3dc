"""Load run configurations from JSON files."""

import dataclasses
import json
import pathlib
from typing import Any, Dict, FrozenSet, Mapping, Type, TypeVar

import numpy as np
from aenum import Enum

from eqpal.methods.auglag import AuglagConfig
from eqpal.methods.burgers_testbed import (
    BurgersConfig,
    ConstraintSense,
    IntegralConstraint,
    IntegralKind,
)
from eqpal.methods.eqp import EqpPreset
from eqpal.methods.eqpbtr import EqpSettings, ToleranceSchedule
from eqpal.methods.experiment import ReferenceSettings, RunConfig
from eqpal.methods.trust_region import TrConfig

T = TypeVar("T")

_NESTED_SECTIONS = ("testbed", "auglag", "trustregion", "eqp", "reference")


class ConfigError(ValueError):
    """Invalid run configuration."""


def load_config(*, config_file: pathlib.Path) -> RunConfig:
    """Loads a run configuration file.

    The file holds a JSON object with the optional keys method, seed,
    label, output_directory, testbed, auglag, trustregion, eqp and
    reference. Missing keys take their defaults, unknown keys are rejected.

    Args:
        config_file (pathlib.Path): JSON configuration file

    Returns:
        validated run configuration
    """
    if not config_file.exists():
        raise IOError(f"{config_file} does not exist.")

    if not config_file.is_file():
        raise IOError(f"{config_file} is not a file.")

    try:
        with open(config_file, "r", encoding="utf-8") as content:
            raw = json.load(content)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{config_file} is no valid JSON: {exc.msg} (line {exc.lineno})."
        ) from exc

    return parse_config(raw)


def parse_config(raw: Any) -> RunConfig:
    """Build a run configuration from a parsed JSON object.

    Args:
        raw (Any): parsed configuration

    Returns:
        validated run configuration
    """
    section = _as_mapping(raw, "<root>")
    _check_keys(section, _field_names(RunConfig), "")

    kwargs: Dict[str, Any] = {
        key: value
        for key, value in section.items()
        if key not in _NESTED_SECTIONS
    }
    if "testbed" in section:
        kwargs["testbed"] = _parse_testbed(section["testbed"])
    if "auglag" in section:
        kwargs["auglag"] = _build(AuglagConfig, section["auglag"], "auglag")
    if "trustregion" in section:
        kwargs["trustregion"] = _build(
            TrConfig, section["trustregion"], "trustregion"
        )
    if "eqp" in section:
        kwargs["eqp"] = _parse_eqp(section["eqp"])
    if "reference" in section:
        kwargs["reference"] = _build(
            ReferenceSettings, section["reference"], "reference"
        )
    return _construct(RunConfig, kwargs, "<root>")


def config_to_dict(run_config: RunConfig) -> Dict[str, Any]:
    """JSON-ready mapping that :func:`parse_config` turns back into the config.

    Args:
        run_config (RunConfig): configuration to serialize

    Returns:
        mapping of plain Python values
    """
    return _plain(dataclasses.asdict(run_config))


def _parse_testbed(raw: Any) -> BurgersConfig:
    section = dict(_as_mapping(raw, "testbed"))
    _check_keys(section, _field_names(BurgersConfig), "testbed")
    if "constraints" in section:
        entries = section["constraints"]
        if not isinstance(entries, list):
            raise ConfigError("testbed.constraints must be a list.")
        section["constraints"] = tuple(
            _parse_constraint(entry, f"testbed.constraints[{index}]")
            for index, entry in enumerate(entries)
        )
    return _construct(BurgersConfig, section, "testbed")


def _parse_constraint(raw: Any, path: str) -> IntegralConstraint:
    section = dict(_as_mapping(raw, path))
    _check_keys(section, _field_names(IntegralConstraint), path)
    try:
        if "kind" in section:
            section["kind"] = IntegralKind(section["kind"])
        if "sense" in section:
            section["sense"] = ConstraintSense(section["sense"])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return _construct(IntegralConstraint, section, path)


def _parse_eqp(raw: Any) -> EqpSettings:
    section = dict(_as_mapping(raw, "eqp"))
    _check_keys(section, _field_names(EqpSettings), "eqp")
    if "schedule" in section:
        section["schedule"] = _build(
            ToleranceSchedule, section["schedule"], "eqp.schedule"
        )
    if "preset" in section:
        try:
            section["preset"] = EqpPreset(section["preset"])
        except ValueError as exc:
            raise ConfigError(f"eqp.preset: {exc}") from exc
    if section.get("families") is not None:
        section["families"] = tuple(section["families"])
    return _construct(EqpSettings, section, "eqp")


def _build(cls: Type[T], raw: Any, path: str) -> T:
    section = _as_mapping(raw, path)
    _check_keys(section, _field_names(cls), path)
    return _construct(cls, dict(section), path)


def _construct(cls: Type[T], kwargs: Dict[str, Any], path: str) -> T:
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section {path}: {exc}") from exc


def _as_mapping(raw: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(raw, dict):
        raise ConfigError(
            f"{path} must be a JSON object, got {type(raw).__name__}."
        )
    return raw


def _check_keys(
    section: Mapping[str, Any], allowed: FrozenSet[str], path: str
) -> None:
    for key in section:
        if key not in allowed:
            dotted = key if not path else f"{path}.{key}"
            raise ConfigError(f"unknown configuration key {dotted}.")


def _field_names(cls: Any) -> FrozenSet[str]:
    return frozenset(field.name for field in dataclasses.fields(cls))


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _plain(entry) for key, entry in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(entry) for entry in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, pathlib.Path):
        return str(value)
    if isinstance(value, Enum):
        return value.value
    return value
