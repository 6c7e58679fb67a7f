"""The migration decision environment.

One logical owner drives the per-slot loop: apply attack effects,
associate vehicles to roadside units, price every vehicle's migration
decision in latency, admit work against capacity ceilings, update the
optional trust engine, drain queues, and move the vehicles.  The reward
each slot is the sum of per-vehicle utilities and is shared by all
agents.

Observations are local: each vehicle sees its own position, the loads
of its current and next unit, its previous-slot total latency, and the
recent attack frequency on its current unit, all normalized to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import seeding
from .attacks import (
    AttackEffects,
    AttackScenario,
    AttackTrace,
    MaliciousProfile,
    apply_attack_effects,
    ddos_frequency,
    malicious_behavior,
    schedule_attacks,
)
from .config import ExperimentConfig, UtilityConfig
from .world import (
    ChannelParams,
    LatencyBreakdown,
    MigrationDecision,
    Rsu,
    Vehicle,
    WorldState,
    advance_mobility,
    latency_breakdown,
    next_rsu_ahead,
    ring_distance,
)

OBSERVATION_SIZE = 6


class EpisodeOver(RuntimeError):
    """step() was called after the episode's last slot."""


@dataclass(frozen=True)
class VehicleRecord:
    vehicle: int
    rsu: int               # -1 when unserviceable
    next_rsu: int
    action: int
    sigma: float
    serviceable: bool
    admitted: bool
    latency: LatencyBreakdown
    utility: float


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    reward: float
    served_connections: int
    attacked_connections: int
    vehicles: tuple[VehicleRecord, ...]
    rsu_loads: tuple[float, ...]
    attacked: tuple[bool, ...]
    abnormal: tuple[int, ...]


@dataclass(frozen=True)
class EnvStatics:
    """Run-level facts a model-based baseline may legitimately use."""

    road_length: float
    rsu_positions: tuple[tuple[float, float], ...]
    coverage_radius: float
    compute_capacities: tuple[float, ...]
    inter_bandwidths: tuple[float, ...]
    max_load: float
    channel: ChannelParams
    sigma: float
    upload_size: float
    agent_sizes: tuple[float, ...]
    obs_latency_scale: float
    attack_window: int
    transmit_power: float
    noise_power: float


def utility_value(
    served_connections: int,
    total_latency: float,
    attacked_connections: int,
    weights: UtilityConfig,
) -> float:
    """Per-vehicle utility: service quantity minus latency minus exposure."""
    return (
        weights.service_weight * served_connections
        - weights.latency_weight * total_latency
        - weights.security_weight * attacked_connections
    )


def utility_from_state(
    state: WorldState,
    vehicle_id: int,
    latency: LatencyBreakdown,
    weights: UtilityConfig,
) -> float:
    """Utility computed from a state's connection map and attack flags.

    The service and exposure terms are system-level sums shared by all
    vehicles; only the latency term is the vehicle's own.
    """
    served = len(state.connections)
    attacked_ids = {r.id for r in state.rsus if r.under_attack}
    attacked = sum(1 for rid in state.connections.values() if rid in attacked_ids)
    return utility_value(served, latency.total, attacked, weights)


def associate(
    state: WorldState, banned: frozenset[int] = frozenset()
) -> dict[int, int]:
    """Connect each vehicle to the nearest covering unit with spare capacity.

    Distances follow the wrap-around road geometry.  Ties break toward
    the lower unit id.  A vehicle covered by nothing connects through
    the nearest already-connected vehicle within its communication
    range (one hop), to that relay's unit, capacity permitting;
    otherwise it stays unserved for the slot.
    """
    period = state.road_length
    connections: dict[int, int] = {}
    counts = {rsu.id: 0 for rsu in state.rsus}
    unserved: list[Vehicle] = []

    for vehicle in sorted(state.vehicles, key=lambda v: v.id):
        candidates = []
        for rsu in state.rsus:
            if rsu.id in banned:
                continue
            d = ring_distance(vehicle.position, rsu.position, period)
            if d < rsu.coverage_radius:
                candidates.append((d, rsu.id, rsu.max_connections))
        candidates.sort()
        for _, rsu_id, cap in candidates:
            if counts[rsu_id] < cap:
                connections[vehicle.id] = rsu_id
                counts[rsu_id] += 1
                break
        else:
            unserved.append(vehicle)

    rsus_by_id = {rsu.id: rsu for rsu in state.rsus}
    connected = [v for v in state.vehicles if v.id in connections]
    for vehicle in unserved:
        relays = sorted(
            connected,
            key=lambda r: (ring_distance(vehicle.position, r.position, period), r.id),
        )
        for relay in relays:
            if ring_distance(vehicle.position, relay.position, period) >= vehicle.comm_range:
                break  # sorted by distance: nothing closer remains
            target = connections[relay.id]
            if counts[target] < rsus_by_id[target].max_connections:
                connections[vehicle.id] = target
                counts[target] += 1
                break

    return connections


class MigrationEnv:
    """Seed-deterministic episodic environment over the world model."""

    def __init__(self, config: ExperimentConfig, seed: int, trust_engine=None):
        config.validate()
        self.config = config
        self.seed = seed
        self.trust = trust_engine
        self.scenario = AttackScenario(
            kind=config.attack.kind,
            intensity=config.attack.intensity,
            target_fraction=config.attack.target_fraction,
            per_slot_probability=config.attack.per_slot_probability,
            window=config.attack.window,
        )
        self.effects = AttackEffects(
            load_coef=config.attack.load_coef,
            bandwidth_coef=config.attack.bandwidth_coef,
            relay_coef=config.attack.relay_coef,
            radio_bandwidth_floor=config.attack.radio_bandwidth_floor,
            inter_bandwidth_floor=config.attack.inter_bandwidth_floor,
        )
        self.profile = MaliciousProfile(
            tamper_probability=config.attack.tamper_probability,
            delay_factor=config.attack.delay_factor,
            abnormal_threshold=config.attack.abnormal_threshold,
            packets_per_slot=config.attack.packets_per_slot,
            honest_noise_mean=config.attack.honest_noise_mean,
        )

        world = config.world
        spacing = world.road_length / world.rsus
        self._rsu_positions = tuple(
            ((e + 0.5) * spacing, world.rsu_offset) for e in range(world.rsus)
        )
        layout_rng = seeding.generator(seed, "layout")
        lo, hi = world.compute_capacity_range
        self._capacities = tuple(layout_rng.uniform(lo, hi, size=world.rsus))
        malicious = np.zeros(world.rsus, dtype=bool)
        n_mal = round(config.attack.malicious_fraction * world.rsus)
        if n_mal > 0:
            chosen = layout_rng.choice(world.rsus, size=n_mal, replace=False)
            malicious[chosen] = True
        self.malicious_mask = malicious
        self._needs_packet_stream = bool(malicious.any()) or trust_engine is not None

        self.state: WorldState | None = None
        self.trace: AttackTrace | None = None
        self.episode = -1
        self._prev_latency: dict[int, float] = {}
        self._episode_sigma: float = config.ppo.sigma
        self._inter_bandwidths: tuple[float, ...] = ()

    # -- episode lifecycle -------------------------------------------------

    def reset(self, episode: int) -> np.ndarray:
        """Build slot-0 state for the given episode index; returns observations."""
        config = self.config
        world = config.world
        self.episode = episode

        mobility = seeding.generator(self.seed, f"mobility:{episode}")
        sizes_rng = seeding.generator(self.seed, f"agent_sizes:{episode}")
        net_rng = seeding.generator(self.seed, f"network_init:{episode}")

        xs = mobility.uniform(0.0, world.road_length, size=world.vehicles)
        size_lo, size_hi = world.agent_size_range
        sizes = sizes_rng.uniform(size_lo, size_hi, size=world.vehicles)
        vehicles = [
            Vehicle(
                id=u,
                position=(float(xs[u]), 0.0),
                speed=world.vehicle_speed,
                transmit_power=world.transmit_power,
                noise_power=world.noise_power,
                comm_range=world.vehicle_comm_range,
                agent_size=float(sizes[u]),
                upload_size=world.upload_size,
                latency_threshold=world.latency_threshold,
            )
            for u in range(world.vehicles)
        ]

        up_bw = float(net_rng.uniform(*config.channel.uplink_bandwidth_range))
        down_bw = float(net_rng.uniform(*config.channel.downlink_bandwidth_range))
        inter = net_rng.uniform(*config.channel.inter_bandwidth_range, size=world.rsus)
        self._inter_bandwidths = tuple(float(b) for b in inter)
        channel = ChannelParams(
            gain_coefficient=config.channel.gain_coefficient,
            carrier_frequency=config.channel.carrier_frequency,
            light_speed=config.channel.light_speed,
            uplink_bandwidth=up_bw,
            downlink_bandwidth=down_bw,
            inter_rsu_bandwidth=float(np.mean(inter)),
        )

        load_lo, load_hi = world.base_load_range
        base_loads = net_rng.uniform(load_lo, load_hi, size=world.rsus)
        rsus = [
            Rsu(
                id=e,
                position=self._rsu_positions[e],
                coverage_radius=world.coverage_radius,
                compute_capacity=float(self._capacities[e]),
                base_load=float(base_loads[e]),
                max_load=world.max_load,
                max_connections=world.max_connections,
                inter_bandwidth=self._inter_bandwidths[e],
                is_malicious=bool(self.malicious_mask[e]),
            )
            for e in range(world.rsus)
        ]

        self.state = WorldState(
            vehicles=vehicles,
            rsus=rsus,
            channel=channel,
            road_length=world.road_length,
            slot=0,
        )
        attack_seed = seeding.derive_seed(self.seed, f"attacks:{episode}")
        self.trace = schedule_attacks(
            self.scenario, world.rsus, attack_seed, world.slots, self.malicious_mask
        )
        self._packet_rng = seeding.generator(self.seed, f"malicious:{episode}")
        self._prev_latency = {v.id: 0.0 for v in vehicles}
        if self.trust is not None:
            self.trust.start_episode()
        return self.observations()

    @property
    def done(self) -> bool:
        return self.state is None or self.state.slot >= self.config.world.slots

    def statics(self) -> EnvStatics:
        assert self.state is not None, "reset() before statics()"
        return EnvStatics(
            road_length=self.state.road_length,
            rsu_positions=self._rsu_positions,
            coverage_radius=self.config.world.coverage_radius,
            compute_capacities=self._capacities,
            inter_bandwidths=self._inter_bandwidths,
            max_load=self.config.world.max_load,
            channel=self.state.channel,
            sigma=self._episode_sigma,
            upload_size=self.config.world.upload_size,
            agent_sizes=tuple(v.agent_size for v in self.state.vehicles),
            obs_latency_scale=self.config.world.obs_latency_scale,
            attack_window=self.scenario.window,
            transmit_power=self.config.world.transmit_power,
            noise_power=self.config.world.noise_power,
        )

    # -- per-slot transition -----------------------------------------------

    def step(self, actions) -> tuple[np.ndarray, float, SlotRecord]:
        if self.state is None:
            raise RuntimeError("reset() must be called before step()")
        if self.done:
            raise EpisodeOver(
                f"episode has exactly {self.config.world.slots} slots; call reset()"
            )
        actions = list(actions)
        if len(actions) != len(self.state.vehicles):
            raise ValueError(
                f"actions length {len(actions)} != vehicle count "
                f"{len(self.state.vehicles)}"
            )
        config = self.config
        t = self.state.slot

        state = apply_attack_effects(self.state, self.trace, self.scenario, t, self.effects)

        banned = self.trust.banned if self.trust is not None else frozenset()
        connections = associate(state, frozenset(banned))
        state = replace(state, connections=connections)

        served_units = set(connections.values())
        abnormal = [0] * len(state.rsus)
        if self._needs_packet_stream:
            rsus = []
            for rsu in state.rsus:
                count, delay = malicious_behavior(rsu, self.profile, self._packet_rng)
                if not rsu.is_malicious and rsu.id not in served_units:
                    # Honest monitor noise rides on served traffic only;
                    # compromised units beacon to their infrastructure
                    # whether or not any vehicle is connected.
                    count = 0
                abnormal[rsu.id] = count
                self.trace.abnormal[t, rsu.id] = count
                rsus.append(replace(rsu, processing_delay_factor=delay))
            state = replace(state, rsus=rsus)

        rsus_by_id = {r.id: r for r in state.rsus}
        served = len(connections)
        attacked_ids = {r.id for r in state.rsus if r.under_attack}
        attacked_connections = sum(1 for rid in connections.values() if rid in attacked_ids)

        # Latencies are priced against the start-of-slot queue snapshot
        # (requests within one slot are concurrent); admissions then land
        # on the queues in vehicle-id order for the C1 feasibility check.
        running_loads = {r.id: r.load for r in state.rsus}
        vehicle_records: list[VehicleRecord] = []
        reward = 0.0
        completions: list[tuple[int, float, float]] = []  # (rsu, latency, threshold)
        for vehicle, action in zip(state.vehicles, actions):
            gamma, sigma = self._decode_action(action)
            decision = MigrationDecision(gamma, sigma)
            rsu_id = connections.get(vehicle.id)
            if rsu_id is None:
                latency = LatencyBreakdown.penalty(config.world.penalty_latency)
                record = VehicleRecord(
                    vehicle=vehicle.id, rsu=-1, next_rsu=-1, action=int(action),
                    sigma=sigma, serviceable=False, admitted=False,
                    latency=latency,
                    utility=utility_value(served, latency.total,
                                          attacked_connections, config.utility),
                )
            else:
                current = rsus_by_id[rsu_id]
                nxt = next_rsu_ahead(state, vehicle, rsu_id)
                mig_size = sigma * vehicle.agent_size if gamma == 1 else 0.0
                work_current = vehicle.agent_size - mig_size
                admitted = (
                    running_loads[current.id] + work_current < current.max_load
                    and running_loads[nxt.id] + mig_size < nxt.max_load
                )
                if admitted:
                    latency = latency_breakdown(
                        vehicle, current, nxt, decision, state.channel,
                        radio_bandwidth_floor=self.effects.radio_bandwidth_floor,
                        inter_bandwidth_floor=self.effects.inter_bandwidth_floor,
                        x_period=state.road_length,
                    )
                    running_loads[current.id] += work_current
                    running_loads[nxt.id] += mig_size
                else:
                    latency = LatencyBreakdown.penalty(config.world.penalty_latency)
                completions.append((rsu_id, latency.total, vehicle.latency_threshold))
                record = VehicleRecord(
                    vehicle=vehicle.id, rsu=rsu_id, next_rsu=nxt.id,
                    action=int(action), sigma=sigma, serviceable=True,
                    admitted=admitted, latency=latency,
                    utility=utility_value(served, latency.total,
                                          attacked_connections, config.utility),
                )
            self._prev_latency[vehicle.id] = record.latency.total
            reward += record.utility
            vehicle_records.append(record)
        for rsu in state.rsus:
            rsu.load = running_loads[rsu.id]

        if self.trust is not None:
            conn_counts = {r.id: 0 for r in state.rsus}
            for rid in connections.values():
                conn_counts[rid] += 1
            self.trust.observe_slot(
                abnormal_counts=abnormal,
                completions=completions,
                connection_counts=[conn_counts[r.id] for r in state.rsus],
            )

        drained = []
        dt = config.world.slot_duration
        for rsu in state.rsus:
            new_load = max(rsu.base_load, rsu.load - rsu.compute_capacity * dt)
            drained.append(replace(rsu, load=new_load))
        state = replace(state, rsus=drained)

        record = SlotRecord(
            slot=t,
            reward=reward,
            served_connections=served,
            attacked_connections=attacked_connections,
            vehicles=tuple(vehicle_records),
            rsu_loads=tuple(r.load for r in state.rsus),
            attacked=tuple(r.under_attack for r in state.rsus),
            abnormal=tuple(abnormal),
        )

        state = advance_mobility(state, dt) if state.vehicles else state
        state = replace(state, slot=t + 1)
        self.state = state
        return self.observations(), reward, record

    def _decode_action(self, action) -> tuple[int, float]:
        levels = self.config.ppo.sigma_levels
        if levels is None:
            gamma = int(action)
            if gamma not in (0, 1):
                raise ValueError(f"action must be 0 or 1, got {action!r}")
            return gamma, self.config.ppo.sigma
        index = int(action)
        if not 0 <= index < len(levels):
            raise ValueError(f"action index {index} out of range for sigma levels")
        sigma = levels[index]
        return (1 if sigma > 0.0 else 0), sigma

    @property
    def action_count(self) -> int:
        levels = self.config.ppo.sigma_levels
        return 2 if levels is None else len(levels)

    # -- observations --------------------------------------------------------

    def observations(self) -> np.ndarray:
        """Local observation vectors, one row per vehicle, components in [0, 1]."""
        state = self.state
        assert state is not None
        world = self.config.world
        banned = self.trust.banned if self.trust is not None else frozenset()
        preview = associate(state, frozenset(banned))
        rsus_by_id = {r.id: r for r in state.rsus}
        out = np.zeros((len(state.vehicles), OBSERVATION_SIZE))
        t_prev = state.slot - 1
        for i, vehicle in enumerate(state.vehicles):
            rsu_id = preview.get(vehicle.id)
            if rsu_id is None:
                load_cur = load_next = 1.0
                nearest = min(
                    state.rsus,
                    key=lambda r: ring_distance(vehicle.position, r.position,
                                                state.road_length),
                )
                freq_id = nearest.id
            else:
                current = rsus_by_id[rsu_id]
                nxt = next_rsu_ahead(state, vehicle, rsu_id)
                load_cur = current.load / current.max_load
                load_next = nxt.load / nxt.max_load
                freq_id = rsu_id
            freq = 0
            if self.trace is not None and t_prev >= 0:
                freq = ddos_frequency(
                    self.trace, freq_id, min(t_prev, self.trace.slots - 1)
                )
            out[i] = (
                vehicle.position[0] / world.road_length,
                vehicle.position[1] / world.road_length,
                min(load_cur, 1.0),
                min(load_next, 1.0),
                min(self._prev_latency[vehicle.id] / world.obs_latency_scale, 1.0),
                freq / self.scenario.window,
            )
        return np.clip(out, 0.0, 1.0)


def run_episode(env: MigrationEnv, episode: int, policy) -> tuple[float, float, list[SlotRecord]]:
    """Roll one episode under ``policy(obs, env) -> actions``.

    Returns (mean per-slot reward, mean per-vehicle total latency,
    slot records).
    """
    obs = env.reset(episode)
    records: list[SlotRecord] = []
    rewards: list[float] = []
    latencies: list[float] = []
    while not env.done:
        actions = policy(obs, env)
        obs, reward, record = env.step(actions)
        rewards.append(reward)
        latencies.extend(v.latency.total for v in record.vehicles)
        records.append(record)
    mean_reward = float(np.mean(rewards)) if rewards else 0.0
    mean_latency = float(np.mean(latencies)) if latencies else 0.0
    return mean_reward, mean_latency, records
