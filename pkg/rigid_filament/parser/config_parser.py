"""
Parser for scenario configuration YAML files.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import ValidationError

from ..models.config import ScenarioConfig


def parse_scenario_config(
    file_path: Union[str, Path], scenario: Optional[str] = None
) -> ScenarioConfig:
    """
    Parse a scenario YAML file and validate it against the ScenarioConfig model.

    Args:
        file_path: Path to the YAML file
        scenario: Scenario name overriding the one in the file

    Returns:
        ScenarioConfig: Validated configuration

    Raises:
        FileNotFoundError: If the YAML file doesn't exist
        ValueError: If the YAML is malformed or the configuration is invalid
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"Scenario config file not found: {file_path}")

    try:
        with open(file_path, "r") as f:
            yaml_content = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ValueError(f"Invalid YAML in scenario config: {e}")

    if yaml_content is None:
        yaml_content = {}
    if not isinstance(yaml_content, dict):
        raise ValueError("Scenario config must be a mapping at the top level")
    if scenario is not None:
        yaml_content = {**yaml_content, "scenario": scenario}

    return parse_scenario_config_from_yaml(yaml_content)


def parse_scenario_config_from_yaml(yaml_content: Dict[str, Any]) -> ScenarioConfig:
    """
    Build a ScenarioConfig from a YAML dictionary.

    Raises:
        ValueError: If the configuration is invalid
    """
    try:
        return ScenarioConfig(**yaml_content)
    except ValidationError as e:
        raise ValueError(f"Invalid scenario config: {e}")
    except TypeError as e:
        raise ValueError(f"Unexpected error parsing scenario config: {e}")


def apply_overrides(
    config: ScenarioConfig,
    eps: Optional[List[float]] = None,
    out: Optional[Union[str, Path]] = None,
    seed: Optional[int] = None,
) -> ScenarioConfig:
    """
    Apply command line overrides and revalidate.

    Raises:
        ValueError: If the overridden configuration is invalid
    """
    data = config.model_dump()
    if eps:
        data["eps_list"] = list(eps)
    if out is not None:
        data["output"]["directory"] = str(out)
    if seed is not None:
        data["seed"] = seed
    return parse_scenario_config_from_yaml(data)
