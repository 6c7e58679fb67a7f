"""Road geometry, radio channel, and migration-latency model.

Unit conventions used throughout the simulator:

* positions and ranges in meters, time in seconds
* payload sizes (agent workload, uploads) in megabytes
* radio link rates in bits/s (conversion factor ``MB_TO_BITS``)
* the wired backhaul between roadside units in megabits/s
* compute capacity as work throughput in megabytes-of-work per second,
  so a queue of L megabytes drains in L / capacity seconds

All functions here are pure: they never mutate their inputs and return
bit-identical outputs for identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

MB_TO_BITS = 8e6
MB_TO_MEGABITS = 8.0

#: Path loss diverges at zero range; callers clamp distances below this.
MIN_LINK_DISTANCE_M = 1.0


class DegenerateDistanceError(ValueError):
    """Raised when a channel gain is requested at zero range."""


def _require(condition: bool, name: str, message: str) -> None:
    if not condition:
        raise ValueError(f"{name}: {message}")


@dataclass
class Vehicle:
    """A vehicle carrying one offloaded agent workload."""

    id: int
    position: tuple[float, float]
    speed: float = 15.0                # m/s along the +x road axis
    transmit_power: float = 0.1        # W
    noise_power: float = 1e-13         # W, receiver noise floor
    comm_range: float = 300.0          # m, one-hop relay reach
    agent_size: float = 100.0          # MB, full agent workload
    upload_size: float = 20.0          # MB, per-slot request upload
    latency_threshold: float = 20.0    # s, acceptable total latency

    def __post_init__(self) -> None:
        _require(self.speed >= 0, "vehicle.speed", "must be >= 0")
        _require(self.transmit_power > 0, "vehicle.transmit_power", "must be > 0")
        _require(self.noise_power > 0, "vehicle.noise_power", "must be > 0")
        _require(self.comm_range > 0, "vehicle.comm_range", "must be > 0")
        _require(self.agent_size > 0, "vehicle.agent_size", "must be > 0")
        _require(self.upload_size > 0, "vehicle.upload_size", "must be > 0")
        _require(self.latency_threshold > 0, "vehicle.latency_threshold", "must be > 0")


@dataclass
class Rsu:
    """A roadside unit hosting agent workloads.

    ``base_load`` is the standing load the unit never drains below;
    ``load`` is the current queue including admitted and attack-injected
    work.  The ``*_scale`` factors are per-slot attack effects on the
    unit's radio and backhaul bandwidths (1.0 = unimpaired) and
    ``processing_delay_factor`` is the slowdown a compromised unit
    applies to work it serves.
    """

    id: int
    position: tuple[float, float]
    coverage_radius: float = 600.0
    compute_capacity: float = 200.0      # MB of work per second
    base_load: float = 0.0               # MB
    max_load: float = 4000.0             # MB, admission ceiling
    max_connections: int = 8
    inter_bandwidth: float = 1000.0      # Mb/s into this unit
    is_malicious: bool = False
    under_attack: bool = False
    load: float = field(default=math.nan)
    uplink_scale: float = 1.0
    downlink_scale: float = 1.0
    inter_scale: float = 1.0
    processing_delay_factor: float = 1.0

    def __post_init__(self) -> None:
        _require(self.coverage_radius > 0, "rsu.coverage_radius", "must be > 0")
        _require(self.compute_capacity > 0, "rsu.compute_capacity", "must be > 0")
        _require(self.base_load >= 0, "rsu.base_load", "must be >= 0")
        _require(self.max_load > 0, "rsu.max_load", "must be > 0")
        _require(self.max_connections >= 1, "rsu.max_connections", "must be >= 1")
        _require(self.inter_bandwidth > 0, "rsu.inter_bandwidth", "must be > 0")
        if math.isnan(self.load):
            self.load = self.base_load


@dataclass(frozen=True)
class ChannelParams:
    """Radio constants shared by every vehicle-to-RSU link."""

    gain_coefficient: float = 0.06
    carrier_frequency: float = 5.9e9     # Hz
    light_speed: float = 3e8             # m/s
    uplink_bandwidth: float = 1.5e8      # Hz
    downlink_bandwidth: float = 1.5e8    # Hz
    inter_rsu_bandwidth: float = 1000.0  # Mb/s, nominal backhaul

    def __post_init__(self) -> None:
        for name in (
            "gain_coefficient",
            "carrier_frequency",
            "light_speed",
            "uplink_bandwidth",
            "downlink_bandwidth",
            "inter_rsu_bandwidth",
        ):
            _require(getattr(self, name) > 0, f"channel.{name}", "must be > 0")


@dataclass(frozen=True)
class MigrationDecision:
    """Per-vehicle choice: send a portion of the agent ahead or not."""

    pre_migrate: int
    portion: float = 0.5

    def __post_init__(self) -> None:
        _require(self.pre_migrate in (0, 1), "decision.pre_migrate", "must be 0 or 1")
        _require(0.0 <= self.portion <= 1.0, "decision.portion", "must be in [0, 1]")


@dataclass(frozen=True)
class LatencyBreakdown:
    """The five latency components of one migration and their total."""

    up: float
    down: float
    mig: float
    proc_current: float
    proc_next: float
    proc_total: float
    total: float

    @classmethod
    def penalty(cls, seconds: float) -> "LatencyBreakdown":
        """A degenerate breakdown for unserviceable or rejected tasks.

        The cost is booked as processing so the component identity
        total == up + proc_total + down still holds.
        """
        return cls(
            up=0.0,
            down=0.0,
            mig=0.0,
            proc_current=seconds,
            proc_next=0.0,
            proc_total=seconds,
            total=seconds,
        )


@dataclass
class WorldState:
    """Positions, loads, links, and attack flags at one time slot."""

    vehicles: list[Vehicle]
    rsus: list[Rsu]
    channel: ChannelParams
    road_length: float
    slot: int = 0
    connections: dict[int, int] = field(default_factory=dict)


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Euclidean distance between two points (symmetric, >= 0)."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


def ring_distance(a: tuple[float, float], b: tuple[float, float],
                  x_period: float) -> float:
    """Distance on a road that wraps along x with the given period.

    Matches the wrap-around mobility model: a vehicle at the segment
    end is adjacent to units at the segment start.
    """
    dx = abs(a[0] - b[0]) % x_period
    dx = min(dx, x_period - dx)
    return math.hypot(dx, a[1] - b[1])


def channel_gain(d: float, params: ChannelParams) -> float:
    """Deterministic path-loss gain at range ``d``; scales as 1/d^2."""
    if d <= 0.0:
        raise DegenerateDistanceError(
            f"degenerate distance {d!r}; clamp to at least {MIN_LINK_DISTANCE_M} m"
        )
    wavelength_term = params.light_speed / (4.0 * math.pi * params.carrier_frequency * d)
    return params.gain_coefficient * wavelength_term * wavelength_term


def link_rate(gain: float, power: float, noise: float, bandwidth: float) -> float:
    """Shannon rate in bits/s for the given SNR and bandwidth.

    Serves both the uplink and the downlink; monotone increasing in
    ``power`` and ``gain``.
    """
    _require(noise > 0, "link_rate.noise", "must be > 0")
    _require(bandwidth > 0, "link_rate.bandwidth", "must be > 0")
    _require(gain >= 0, "link_rate.gain", "must be >= 0")
    _require(power >= 0, "link_rate.power", "must be >= 0")
    return bandwidth * math.log2(1.0 + power * gain / noise)


def premigration_split(
    agent_size: float, decision: MigrationDecision
) -> tuple[float, float, float]:
    """Split the agent into (sent-ahead, download-from-current, download-from-next).

    The two download shares always sum to the full agent size.
    """
    if decision.pre_migrate == 1:
        mig_size = decision.portion * agent_size
    else:
        mig_size = 0.0
    return mig_size, agent_size - mig_size, mig_size


def _radio_rate(
    vehicle: Vehicle,
    rsu: Rsu,
    channel: ChannelParams,
    *,
    downlink: bool,
    min_distance: float,
    bandwidth_floor: float,
    x_period: float | None,
) -> float:
    if x_period is None:
        d = distance(vehicle.position, rsu.position)
    else:
        d = ring_distance(vehicle.position, rsu.position, x_period)
    gain = channel_gain(max(d, min_distance), channel)
    if downlink:
        bandwidth = max(channel.downlink_bandwidth * rsu.downlink_scale, bandwidth_floor)
    else:
        bandwidth = max(channel.uplink_bandwidth * rsu.uplink_scale, bandwidth_floor)
    return link_rate(gain, vehicle.transmit_power, vehicle.noise_power, bandwidth)


def latency_breakdown(
    vehicle: Vehicle,
    current: Rsu,
    nxt: Rsu,
    decision: MigrationDecision,
    channel: ChannelParams,
    *,
    min_distance: float = MIN_LINK_DISTANCE_M,
    radio_bandwidth_floor: float = 1e6,
    inter_bandwidth_floor: float = 1.0,
    x_period: float | None = None,
) -> LatencyBreakdown:
    """All latency components of serving one vehicle this slot.

    The caller guarantees the vehicle is serviceable through ``current``
    (in coverage or relayed); unserviceable vehicles get
    ``LatencyBreakdown.penalty`` instead.

    Processing runs on both units when part of the agent was sent
    ahead: the task completes with the current unit if it is strictly
    faster, otherwise it waits for the next unit plus the transfer.
    With no pre-migration the next-unit branch is suppressed entirely.

    ``x_period`` switches link ranges to wrap-around road geometry.
    """
    mig_size, down_from_current, down_from_next = premigration_split(
        vehicle.agent_size, decision
    )

    up_rate = _radio_rate(
        vehicle, current, channel,
        downlink=False, min_distance=min_distance,
        bandwidth_floor=radio_bandwidth_floor, x_period=x_period,
    )
    up = vehicle.upload_size * MB_TO_BITS / up_rate

    if mig_size > 0.0:
        inter_bw = max(nxt.inter_bandwidth * nxt.inter_scale, inter_bandwidth_floor)
        mig = mig_size * MB_TO_MEGABITS / inter_bw
    else:
        mig = 0.0

    proc_current = (
        (current.load + vehicle.agent_size - mig_size)
        / current.compute_capacity
        * current.processing_delay_factor
    )
    if decision.pre_migrate == 1:
        proc_next = (
            (nxt.load + mig_size) / nxt.compute_capacity * nxt.processing_delay_factor
        )
        if proc_current < proc_next:
            proc_total = proc_current
        else:
            proc_total = proc_next + mig
    else:
        proc_next = 0.0
        proc_total = proc_current

    down_rate_current = _radio_rate(
        vehicle, current, channel,
        downlink=True, min_distance=min_distance,
        bandwidth_floor=radio_bandwidth_floor, x_period=x_period,
    )
    down = down_from_current * MB_TO_BITS / down_rate_current
    if down_from_next > 0.0:
        down_rate_next = _radio_rate(
            vehicle, nxt, channel,
            downlink=True, min_distance=min_distance,
            bandwidth_floor=radio_bandwidth_floor, x_period=x_period,
        )
        down += down_from_next * MB_TO_BITS / down_rate_next

    return LatencyBreakdown(
        up=up,
        down=down,
        mig=mig,
        proc_current=proc_current,
        proc_next=proc_next,
        proc_total=proc_total,
        total=up + proc_total + down,
    )


def next_rsu_ahead(state: WorldState, vehicle: Vehicle, current_id: int) -> Rsu:
    """The nearest unit ahead of the vehicle along the road, excluding
    the current one; wraps to the road start like the mobility model."""
    x = vehicle.position[0]
    best: Rsu | None = None
    best_gap = math.inf
    for rsu in state.rsus:
        if rsu.id == current_id:
            continue
        gap = (rsu.position[0] - x) % state.road_length
        if gap < best_gap:
            best_gap = gap
            best = rsu
    if best is None:
        raise ValueError("next_rsu_ahead: need at least two roadside units")
    return best


def advance_mobility(state: WorldState, dt: float) -> WorldState:
    """Move every vehicle along +x by speed*dt, wrapping at the road end."""
    _require(dt > 0, "advance_mobility.dt", "must be > 0")
    moved = []
    for v in state.vehicles:
        x = (v.position[0] + v.speed * dt) % state.road_length
        moved.append(replace(v, position=(x, v.position[1])))
    return replace(state, vehicles=moved, rsus=[replace(r) for r in state.rsus])
