"""Experiment configuration: defaults, JSON loading, validation, echo.

Every knob the simulator exposes lives here with its default.  Loading
rejects unknown keys and surfaces invariant violations with the field
name, so a typo in a config file fails loudly instead of silently
running the defaults.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .attacks import ATTACK_KINDS

ENV_PREFIX = "VECMIG_"

TRUST_MODES = ("corrected", "paper_verbatim")


@dataclass(frozen=True)
class WorldConfig:
    vehicles: int = 20
    rsus: int = 15
    slots: int = 20
    slot_duration: float = 20.0            # s
    road_length: float = 10_000.0          # m
    rsu_offset: float = 20.0               # m off the road axis
    coverage_radius: float = 600.0         # m
    vehicle_speed: float = 15.0            # m/s
    vehicle_comm_range: float = 300.0      # m (one-hop relay reach)
    max_connections: int = 8
    transmit_power: float = 0.1            # W
    noise_power: float = 1e-13             # W
    upload_size: float = 20.0              # MB per slot
    agent_size_range: tuple[float, float] = (25.0, 200.0)   # MB
    compute_capacity_range: tuple[float, float] = (100.0, 300.0)  # MB/s
    base_load_range: tuple[float, float] = (0.0, 300.0)     # MB
    max_load: float = 4000.0               # MB
    latency_threshold: float = 25.0        # s, acceptable per-vehicle latency
    penalty_latency: float = 10.0          # s for unserviceable/rejected tasks
    obs_latency_scale: float = 60.0        # s, observation normalizer

    def validate(self) -> None:
        _positive_int(self.vehicles, "world.vehicles", allow_zero=True)
        _positive_int(self.rsus, "world.rsus", minimum=2)
        _positive_int(self.slots, "world.slots")
        _positive(self.slot_duration, "world.slot_duration")
        _positive(self.road_length, "world.road_length")
        _positive(self.coverage_radius, "world.coverage_radius")
        _nonnegative(self.vehicle_speed, "world.vehicle_speed")
        _positive(self.vehicle_comm_range, "world.vehicle_comm_range")
        _positive_int(self.max_connections, "world.max_connections")
        _positive(self.transmit_power, "world.transmit_power")
        _positive(self.noise_power, "world.noise_power")
        _positive(self.upload_size, "world.upload_size")
        _range_pair(self.agent_size_range, "world.agent_size_range")
        _range_pair(self.compute_capacity_range, "world.compute_capacity_range")
        _range_pair(self.base_load_range, "world.base_load_range", allow_zero_low=True)
        _positive(self.max_load, "world.max_load")
        _positive(self.latency_threshold, "world.latency_threshold")
        _positive(self.penalty_latency, "world.penalty_latency")
        _positive(self.obs_latency_scale, "world.obs_latency_scale")


@dataclass(frozen=True)
class ChannelConfig:
    gain_coefficient: float = 0.06
    carrier_frequency: float = 5.9e9
    light_speed: float = 3e8
    uplink_bandwidth_range: tuple[float, float] = (1.0e8, 2.0e8)   # Hz
    downlink_bandwidth_range: tuple[float, float] = (1.0e8, 2.0e8)  # Hz
    inter_bandwidth_range: tuple[float, float] = (250.0, 2000.0)    # Mb/s

    def validate(self) -> None:
        _positive(self.gain_coefficient, "channel.gain_coefficient")
        _positive(self.carrier_frequency, "channel.carrier_frequency")
        _positive(self.light_speed, "channel.light_speed")
        _range_pair(self.uplink_bandwidth_range, "channel.uplink_bandwidth_range")
        _range_pair(self.downlink_bandwidth_range, "channel.downlink_bandwidth_range")
        _range_pair(self.inter_bandwidth_range, "channel.inter_bandwidth_range")


@dataclass(frozen=True)
class UtilityConfig:
    service_weight: float = 0.25    # reward per served connection
    latency_weight: float = 1.0     # reward penalty per second of latency
    security_weight: float = 0.25   # penalty per connection on an attacked unit

    def validate(self) -> None:
        _nonnegative(self.service_weight, "utility.service_weight")
        _nonnegative(self.latency_weight, "utility.latency_weight")
        _nonnegative(self.security_weight, "utility.security_weight")


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "none"
    intensity: float = 1.0
    target_fraction: float = 0.3
    per_slot_probability: float = 0.5
    window: int = 5
    load_coef: float = 0.5
    bandwidth_coef: float = 0.5
    relay_coef: float = 0.5
    radio_bandwidth_floor: float = 1e6
    inter_bandwidth_floor: float = 1.0
    malicious_fraction: float = 0.0
    tamper_probability: float = 0.06
    delay_factor: float = 12.0
    abnormal_threshold: int = 2
    packets_per_slot: int = 12
    honest_noise_mean: float = 0.2

    def validate(self) -> None:
        if self.kind not in ATTACK_KINDS:
            raise ConfigError(f"attack.kind: {self.kind!r} not in {ATTACK_KINDS}")
        _fraction(self.intensity, "attack.intensity")
        _fraction(self.target_fraction, "attack.target_fraction")
        _fraction(self.per_slot_probability, "attack.per_slot_probability")
        _positive_int(self.window, "attack.window")
        _fraction(self.load_coef, "attack.load_coef")
        _fraction(self.bandwidth_coef, "attack.bandwidth_coef")
        _fraction(self.relay_coef, "attack.relay_coef")
        _positive(self.radio_bandwidth_floor, "attack.radio_bandwidth_floor")
        _positive(self.inter_bandwidth_floor, "attack.inter_bandwidth_floor")
        _fraction(self.malicious_fraction, "attack.malicious_fraction")
        _fraction(self.tamper_probability, "attack.tamper_probability")
        if self.delay_factor < 1.0:
            raise ConfigError("attack.delay_factor: must be >= 1")
        if self.abnormal_threshold < 0:
            raise ConfigError("attack.abnormal_threshold: must be >= 0")
        _positive_int(self.packets_per_slot, "attack.packets_per_slot")
        _nonnegative(self.honest_noise_mean, "attack.honest_noise_mean")


@dataclass(frozen=True)
class PpoConfig:
    episodes: int = 1000
    clip: float = 0.05
    discount: float = 0.95
    epochs: int = 2
    critic_warmup_epochs: int = 4
    critic_window_episodes: int = 5
    batch_size: int = 200
    value_coef: float = 0.5
    entropy_coef: float = 0.02
    learning_rate: float = 1e-4
    optimizer: str = "adaptive"
    advantage_norm: bool = False
    return_scale: float = 0.05
    exploration_floor: float = 0.1
    value_target: str = "td0"
    prob_floor: float = 1e-8
    buffer_capacity: int = 2_000_000
    hidden: tuple[int, ...] = (64, 64)
    sigma: float = 0.7
    sigma_levels: tuple[float, ...] | None = None
    eval_every: int = 10
    eval_episodes: int = 5

    def validate(self) -> None:
        _positive_int(self.episodes, "ppo.episodes")
        if not 0.0 < self.clip < 1.0:
            raise ConfigError(f"ppo.clip: must be in (0, 1), got {self.clip}")
        if not 0.0 < self.discount < 1.0:
            raise ConfigError(f"ppo.discount: must be in (0, 1), got {self.discount}")
        _positive_int(self.epochs, "ppo.epochs", allow_zero=True)
        _positive_int(self.critic_warmup_epochs, "ppo.critic_warmup_epochs",
                      allow_zero=True)
        _positive_int(self.critic_window_episodes, "ppo.critic_window_episodes")
        _positive_int(self.batch_size, "ppo.batch_size")
        _nonnegative(self.value_coef, "ppo.value_coef")
        _nonnegative(self.entropy_coef, "ppo.entropy_coef")
        _positive(self.learning_rate, "ppo.learning_rate")
        if self.optimizer not in ("sgd", "adaptive"):
            raise ConfigError(f"ppo.optimizer: {self.optimizer!r} not in ('sgd', 'adaptive')")
        _positive(self.return_scale, "ppo.return_scale")
        if not 0.0 <= self.exploration_floor < 1.0:
            raise ConfigError("ppo.exploration_floor: must be in [0, 1)")
        if self.value_target not in ("td0", "return"):
            raise ConfigError(
                f"ppo.value_target: {self.value_target!r} not in ('td0', 'return')"
            )
        _positive(self.prob_floor, "ppo.prob_floor")
        _positive_int(self.buffer_capacity, "ppo.buffer_capacity")
        if not self.hidden:
            raise ConfigError("ppo.hidden: need at least one hidden layer size")
        _fraction(self.sigma, "ppo.sigma")
        if self.sigma_levels is not None:
            for level in self.sigma_levels:
                _fraction(level, "ppo.sigma_levels")
            if len(self.sigma_levels) < 2:
                raise ConfigError("ppo.sigma_levels: need at least two levels")
        _positive_int(self.eval_every, "ppo.eval_every")
        _positive_int(self.eval_episodes, "ppo.eval_episodes")


@dataclass(frozen=True)
class TrustConfig:
    enabled: bool = False
    detection_weight: float = 1.0      # weight on accumulated detections
    completion_weight: float = 0.05    # credit per served completion-rate unit
    decay_weight: float = 0.005        # time decay applied to every unit
    initial_threshold: float = 2.0
    adapt_step: float = 0.1
    br_target: float = 0.8
    fbr_limit: float = 0.1
    mode: str = "corrected"
    reset_each_episode: bool = True

    def validate(self) -> None:
        _positive(self.detection_weight, "trust.detection_weight")
        _positive(self.completion_weight, "trust.completion_weight")
        _positive(self.decay_weight, "trust.decay_weight")
        if not 0.0 <= self.adapt_step <= 1.0:
            raise ConfigError("trust.adapt_step: must be in [0, 1]")
        _fraction(self.br_target, "trust.br_target")
        _fraction(self.fbr_limit, "trust.fbr_limit")
        if self.mode not in TRUST_MODES:
            raise ConfigError(f"trust.mode: {self.mode!r} not in {TRUST_MODES}")


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    utility: UtilityConfig = field(default_factory=UtilityConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    trust: TrustConfig = field(default_factory=TrustConfig)

    def validate(self) -> None:
        for section in dataclasses.fields(self):
            getattr(self, section.name).validate()

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **sections: Any) -> "ExperimentConfig":
        return dataclasses.replace(self, **sections)

    def with_overrides(self, overrides: dict[str, Any]) -> "ExperimentConfig":
        """Apply a nested {section: {key: value}} override dict."""
        merged = _merge(self.to_dict(), overrides, path="")
        return config_from_dict(merged)


class ConfigError(ValueError):
    """A configuration value violated its invariant or was unknown."""


_SECTION_TYPES: dict[str, type] = {
    "world": WorldConfig,
    "channel": ChannelConfig,
    "utility": UtilityConfig,
    "attack": AttackConfig,
    "ppo": PpoConfig,
    "trust": TrustConfig,
}

_TUPLE_FIELDS = {
    "agent_size_range", "compute_capacity_range", "base_load_range",
    "uplink_bandwidth_range", "downlink_bandwidth_range", "inter_bandwidth_range",
    "hidden", "sigma_levels",
}


def _positive(value: float, name: str) -> None:
    if not value > 0:
        raise ConfigError(f"{name}: must be > 0, got {value}")


def _nonnegative(value: float, name: str) -> None:
    if value < 0:
        raise ConfigError(f"{name}: must be >= 0, got {value}")


def _positive_int(value: int, name: str, allow_zero: bool = False, minimum: int = 1) -> None:
    if not isinstance(value, int):
        raise ConfigError(f"{name}: must be an integer, got {value!r}")
    lo = 0 if allow_zero else minimum
    if value < lo:
        raise ConfigError(f"{name}: must be >= {lo}, got {value}")


def _fraction(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name}: must be in [0, 1], got {value}")


def _range_pair(value: tuple[float, float], name: str, allow_zero_low: bool = False) -> None:
    if len(value) != 2:
        raise ConfigError(f"{name}: must be a (low, high) pair")
    lo, hi = value
    if allow_zero_low:
        _nonnegative(lo, f"{name}[0]")
    else:
        _positive(lo, f"{name}[0]")
    if hi < lo:
        raise ConfigError(f"{name}: high must be >= low, got {value}")


def _merge(base: dict, overrides: dict, path: str) -> dict:
    out = dict(base)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a section object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _build_section(cls: type, data: dict[str, Any], section: str) -> Any:
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {section}.{key!r}")
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    sections: dict[str, Any] = {}
    for key, value in data.items():
        if key not in _SECTION_TYPES:
            raise ConfigError(f"unknown section {key!r}; expected one of "
                              f"{sorted(_SECTION_TYPES)}")
        if not isinstance(value, dict):
            raise ConfigError(f"section {key!r} must be an object")
        sections[key] = _build_section(_SECTION_TYPES[key], value, key)
    config = ExperimentConfig(**sections)
    config.validate()
    return config


def _env_overrides(environ: dict[str, str]) -> dict[str, Any]:
    """Collect VECMIG_<SECTION>__<KEY>=value overrides from the environment."""
    overrides: dict[str, Any] = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX) or "__" not in key:
            continue
        section, _, field_name = key[len(ENV_PREFIX):].lower().partition("__")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        overrides.setdefault(section, {})[field_name] = value
    return overrides


def load_config(path: str | Path | None = None, *, environ: dict[str, str] | None = None) -> ExperimentConfig:
    """Load and validate a config file (JSON), falling back to defaults.

    An empty or missing file yields the full defaults.  Environment
    variables with the ``VECMIG_<SECTION>__<KEY>`` prefix override file
    values (JSON-parsed when possible).
    """
    data: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text()
        if text.strip():
            loaded = json.loads(text)
            if not isinstance(loaded, dict):
                raise ConfigError("config root must be a JSON object")
            data = loaded
    config = config_from_dict(data)
    env_data = _env_overrides(os.environ if environ is None else environ)
    if env_data:
        config = config.with_overrides(env_data)
    return config


def echo_config(config: ExperimentConfig, out_dir: str | Path) -> Path:
    """Write the effective (defaults-resolved) config next to the run outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "config.json"
    path.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return path
