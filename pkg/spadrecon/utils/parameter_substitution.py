"""
Placeholder substitution for configured output paths

Output path values in a run config may reference {out}, {seed} and {verb};
these helpers find, substitute and validate such placeholders.
"""

import re
from typing import Any, Dict, List

from spadrecon.errors import ConfigError

PLACEHOLDER_PATTERN = r'\{([a-zA-Z0-9_]+)\}'


def find_placeholders(text: str) -> List[str]:
    """
    Find all placeholders in text using {placeholder_name} syntax

    Examples:
        >>> find_placeholders("{out}/recon_{seed}.json")
        ['out', 'seed']
    """
    return re.findall(PLACEHOLDER_PATTERN, text)


def substitute_parameters(
    text: str,
    parameters: Dict[str, Any],
    strict: bool = True
) -> str:
    """
    Replace placeholders in text with parameter values

    Args:
        text: Text containing placeholders like {out}
        parameters: Mapping of placeholder names to values (converted with str())
        strict: If True, raise for unknown placeholders; otherwise leave them as-is

    Returns:
        Text with placeholders replaced

    Raises:
        ConfigError: If strict=True and a placeholder has no value

    Examples:
        >>> substitute_parameters("{out}/recon_{seed}.json", {"out": "runs", "seed": 7})
        'runs/recon_7.json'
    """
    placeholders = find_placeholders(text)
    if strict:
        missing = [p for p in placeholders if p not in parameters]
        if missing:
            raise ConfigError(f"Missing values for placeholders {missing} in {text!r}")

    def replace(match: re.Match) -> str:
        name = match.group(1)
        return str(parameters[name]) if name in parameters else match.group(0)

    return re.sub(PLACEHOLDER_PATTERN, replace, text)


def substitute_in_mapping(values: Any, parameters: Dict[str, Any], strict: bool = True) -> Any:
    """Substitute placeholders in every string of a nested dict/list structure"""
    if isinstance(values, dict):
        return {key: substitute_in_mapping(value, parameters, strict) for key, value in values.items()}
    if isinstance(values, list):
        return [substitute_in_mapping(item, parameters, strict) for item in values]
    if isinstance(values, str):
        return substitute_parameters(values, parameters, strict)
    return values


def validate_parameters(required: List[str], provided: Dict[str, Any]) -> tuple[bool, List[str]]:
    """
    Check that every required placeholder has a value

    Examples:
        >>> validate_parameters(["out", "seed"], {"out": "runs"})
        (False, ['seed'])
    """
    missing = [p for p in required if p not in provided]
    return (len(missing) == 0, missing)
