"""Run configuration: flat ``key = value`` text files with dotted keys.

Example::

    # desk-scale training
    env.track = oval
    env.observation_mode = lowres
    agent.gamma = 0.99
    train.episodes = 150

Unknown keys are rejected. Command-line ``--set key=value`` overrides take
precedence over file values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from lanedrive.agent import AgentConfig
from lanedrive.env import EnvConfig, N_ACTIONS
from lanedrive.qnet import Architecture, Conv, Dense, default_arch


class ConfigError(ValueError):
    """Unparseable config text, unknown key, or invalid value."""


_SCHEMA: dict[str, type] = {
    "env.track": str,
    "env.observation_mode": str,
    "env.frame_skip": int,
    "env.seed": int,
    "env.max_episode_steps": int,
    "agent.gamma": float,
    "agent.epsilon_start": float,
    "agent.epsilon_end": float,
    "agent.epsilon_decay_steps": int,
    "agent.buffer_capacity": int,
    "agent.batch_size": int,
    "agent.target_sync_interval": int,
    "agent.train_start": int,
    "agent.learning_rate": float,
    "agent.seed": int,
    "qnet.arch": str,
    "train.episodes": int,
    "train.checkpoint_interval": int,
    "train.checkpoint_dir": str,
    "train.metrics_file": str,
}

ARCH_PRESETS = ("auto", "paper", "small")


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    arch_preset: str = "auto"
    episodes: int = 100
    checkpoint_interval: int = 25
    checkpoint_dir: str = "checkpoints"
    metrics_file: str = "metrics.csv"


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines into a dict; later keys win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', "
                              f"got {line!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _SCHEMA:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key: str, value: str):
    kind = _SCHEMA[key]
    try:
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {value!r} as {kind.__name__}")


def build_run_config(values: dict[str, str]) -> RunConfig:
    """Materialize a RunConfig from raw string values, validating everything."""
    env_kwargs, agent_kwargs, other = {}, {}, {}
    for key, raw in values.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        val = _coerce(key, raw)
        section, _, name = key.partition(".")
        if section == "env":
            env_kwargs[name] = val
        elif section == "agent":
            agent_kwargs[name] = val
        else:
            other[key] = val
    try:
        cfg = RunConfig(env=EnvConfig(**env_kwargs), agent=AgentConfig(**agent_kwargs))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    cfg.arch_preset = other.get("qnet.arch", cfg.arch_preset)
    if cfg.arch_preset not in ARCH_PRESETS:
        raise ConfigError(f"qnet.arch must be one of {ARCH_PRESETS}, "
                          f"got {cfg.arch_preset!r}")
    cfg.episodes = other.get("train.episodes", cfg.episodes)
    cfg.checkpoint_interval = other.get("train.checkpoint_interval",
                                        cfg.checkpoint_interval)
    cfg.checkpoint_dir = other.get("train.checkpoint_dir", cfg.checkpoint_dir)
    cfg.metrics_file = other.get("train.metrics_file", cfg.metrics_file)
    if cfg.episodes < 0 or cfg.checkpoint_interval < 1:
        raise ConfigError("train.episodes must be >= 0 and "
                          "train.checkpoint_interval >= 1")
    return cfg


def load_run_config(config_path: str | None, overrides: list[str],
                    seed: int | None = None) -> RunConfig:
    """Merge config file, ``--set`` overrides, and the global seed flag."""
    values: dict[str, str] = {}
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as f:
            values.update(parse_config_text(f.read(), origin=str(config_path)))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, _, value = (part.strip() for part in item.partition("="))
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = value
    if seed is not None:
        values["env.seed"] = str(seed)
        values["agent.seed"] = str(seed)
    return build_run_config(values)


def resolve_arch(preset: str, input_shape: tuple[int, ...],
                 n_actions: int = N_ACTIONS) -> Architecture:
    if preset == "auto":
        return default_arch(input_shape, n_actions)
    if preset == "paper":
        return Architecture(input_shape, (Conv(16, 8, 4), Conv(32, 4, 2),
                                          Dense(256, relu=True), Dense(n_actions)))
    if preset == "small":
        return Architecture(input_shape, (Conv(8, 4, 2), Conv(16, 3, 2),
                                          Dense(64, relu=True), Dense(n_actions)))
    raise ConfigError(f"unknown arch preset {preset!r}")
