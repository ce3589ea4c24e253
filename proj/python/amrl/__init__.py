"""Grid-world toolpath planning with DQN, PPO and SAC agents."""

from ._core import (
    HISTORY_LENGTH,
    NUM_ACTIONS,
    ConfigError,
    GridEnv,
    RewardMode,
    Section,
    SectionParseError,
    ToolpathError,
    config_hash,
    default_config,
    evaluate_baseline,
    evaluate_checkpoint,
    export_toolpath,
    normalize_config,
    pattern_score,
    render_toolpath_svg,
    train,
    zigzag_plan,
)

DIRECTIONS = "UDLR"


def action_index(direction: str, deposit: bool) -> int:
    """Index of a (direction, deposit) pair: 2 * direction + deposit."""
    return 2 * DIRECTIONS.index(direction) + int(deposit)


def config_text(**overrides) -> str:
    """Config text with keyword overrides; dots in keys are written as '__'."""
    lines = [f"{k.replace('__', '.')} = {_format(v)}" for k, v in overrides.items()]
    return normalize_config("\n".join(lines) + "\n")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


__all__ = [
    "DIRECTIONS",
    "HISTORY_LENGTH",
    "NUM_ACTIONS",
    "ConfigError",
    "GridEnv",
    "RewardMode",
    "Section",
    "SectionParseError",
    "ToolpathError",
    "action_index",
    "config_hash",
    "config_text",
    "default_config",
    "evaluate_baseline",
    "evaluate_checkpoint",
    "export_toolpath",
    "normalize_config",
    "pattern_score",
    "render_toolpath_svg",
    "train",
    "zigzag_plan",
]
