"""Traffic-based (DDoS) and infrastructure-based (compromised RSU) attacks.

Attack schedules are drawn once per episode from a dedicated stream, so
the same ``(scenario, seed)`` pair always yields the same trace no
matter what else the simulation samples.  Effects are re-applied from
the trace each slot: load is injected into the targeted units and their
radio/backhaul bandwidths are scaled down, never below a configured
floor.  Ground-truth malicious labels ride along in the trace for the
confusion-rate evaluator only; the scoring path never sees them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .world import Rsu, WorldState

ATTACK_KINDS = ("none", "direct", "indirect", "hybrid")

# Attack-injected load may fill a unit, but C1 keeps post-step loads
# strictly below the ceiling; injection stops just short of it.
_LOAD_CEILING_FRACTION = 1.0 - 1e-9


@dataclass(frozen=True)
class AttackScenario:
    """What kind of DDoS pressure an episode is under."""

    kind: str = "none"
    intensity: float = 1.0
    target_fraction: float = 0.3
    per_slot_probability: float = 0.5
    window: int = 5

    def __post_init__(self) -> None:
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"scenario.kind: {self.kind!r} not in {ATTACK_KINDS}")
        for name in ("intensity", "target_fraction", "per_slot_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"scenario.{name}: must be in [0, 1], got {value}")
        if self.window < 1:
            raise ValueError(f"scenario.window: must be >= 1, got {self.window}")


@dataclass(frozen=True)
class AttackEffects:
    """How strongly an attack degrades a targeted unit, per slot."""

    load_coef: float = 0.5        # fraction of max_load injected at intensity 1
    bandwidth_coef: float = 0.5   # radio bandwidth cut at intensity 1
    relay_coef: float = 0.5       # backhaul/uplink cut at intensity 1
    radio_bandwidth_floor: float = 1e6   # Hz
    inter_bandwidth_floor: float = 1.0   # Mb/s

    def __post_init__(self) -> None:
        for name in ("load_coef", "bandwidth_coef", "relay_coef"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"effects.{name}: must be in [0, 1]")
        if self.radio_bandwidth_floor <= 0 or self.inter_bandwidth_floor <= 0:
            raise ValueError("effects bandwidth floors must be > 0")


@dataclass(frozen=True)
class MaliciousProfile:
    """Behavior of a compromised roadside unit.

    Tampering is weak per packet by default: evidence against a
    compromised unit accumulates over slots rather than outing it
    immediately, which is what lets the trust engine's banning rate
    climb gradually.
    """

    tamper_probability: float = 0.06
    delay_factor: float = 12.0
    abnormal_threshold: int = 2
    packets_per_slot: int = 12
    honest_noise_mean: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 <= self.tamper_probability <= 1.0:
            raise ValueError("profile.tamper_probability: must be in [0, 1]")
        if self.delay_factor < 1.0:
            raise ValueError("profile.delay_factor: must be >= 1")
        if self.abnormal_threshold < 0:
            raise ValueError("profile.abnormal_threshold: must be >= 0")
        if self.packets_per_slot < 1:
            raise ValueError("profile.packets_per_slot: must be >= 1")
        if self.honest_noise_mean < 0:
            raise ValueError("profile.honest_noise_mean: must be >= 0")


@dataclass
class AttackTrace:
    """Per-slot, per-RSU attack bookkeeping for one episode."""

    kind: str
    window: int
    targets: tuple[int, ...]
    events: np.ndarray          # (slots, rsus) bool: attack active
    abnormal: np.ndarray        # (slots, rsus) int: abnormal packets emitted
    malicious_mask: np.ndarray  # (rsus,) bool ground truth, immutable per run

    @property
    def slots(self) -> int:
        return self.events.shape[0]

    def active(self, t: int) -> np.ndarray:
        return self.events[t]

    def to_csv(self, path: str | Path) -> None:
        """Per-slot export for post-hoc analysis."""
        path = Path(path)
        with path.open("w", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["slot", "rsu", "attacked", "abnormal_packets", "malicious"])
            for t in range(self.events.shape[0]):
                for e in range(self.events.shape[1]):
                    writer.writerow([
                        t, e, int(self.events[t, e]),
                        int(self.abnormal[t, e]), int(self.malicious_mask[e]),
                    ])


def schedule_attacks(
    scenario: AttackScenario,
    rsu_count: int,
    episode_seed: int,
    slots: int,
    malicious_mask: np.ndarray | None = None,
) -> AttackTrace:
    """Draw the episode's targets and per-slot event indicators.

    ``kind == "none"`` yields an empty trace.  The abnormal-packet
    counts start at zero and are filled in as the episode runs.
    """
    if malicious_mask is None:
        malicious_mask = np.zeros(rsu_count, dtype=bool)
    events = np.zeros((slots, rsu_count), dtype=bool)
    targets: tuple[int, ...] = ()
    if scenario.kind != "none" and scenario.target_fraction > 0.0:
        rng = np.random.Generator(np.random.PCG64(episode_seed))
        n_targets = math.ceil(scenario.target_fraction * rsu_count)
        chosen = rng.choice(rsu_count, size=n_targets, replace=False)
        targets = tuple(sorted(int(i) for i in chosen))
        hits = rng.random((slots, len(targets))) < scenario.per_slot_probability
        for j, rsu_id in enumerate(targets):
            events[:, rsu_id] = hits[:, j]
    return AttackTrace(
        kind=scenario.kind,
        window=scenario.window,
        targets=targets,
        events=events,
        abnormal=np.zeros((slots, rsu_count), dtype=np.int64),
        malicious_mask=np.asarray(malicious_mask, dtype=bool).copy(),
    )


def _clear_slot_effects(rsu: Rsu) -> Rsu:
    return replace(
        rsu,
        under_attack=False,
        uplink_scale=1.0,
        downlink_scale=1.0,
        inter_scale=1.0,
    )


def _apply_direct(rsu: Rsu, intensity: float, effects: AttackEffects) -> Rsu:
    injected = intensity * rsu.max_load * effects.load_coef
    new_load = min(rsu.load + injected, rsu.max_load * _LOAD_CEILING_FRACTION)
    scale = 1.0 - intensity * effects.bandwidth_coef
    return replace(
        rsu,
        load=new_load,
        uplink_scale=rsu.uplink_scale * scale,
        downlink_scale=rsu.downlink_scale * scale,
    )


def _apply_indirect(rsu: Rsu, intensity: float, effects: AttackEffects) -> Rsu:
    scale = 1.0 - intensity * effects.relay_coef
    return replace(
        rsu,
        inter_scale=rsu.inter_scale * scale,
        uplink_scale=rsu.uplink_scale * scale,
    )


def apply_attack_effects(
    state: WorldState,
    trace: AttackTrace,
    scenario: AttackScenario,
    t: int,
    effects: AttackEffects | None = None,
) -> WorldState:
    """Reset per-slot effects and apply slot ``t``'s events to the state.

    Direct attacks inject load and choke the unit's radio bandwidths;
    indirect attacks choke the backhaul into the unit and the uplink
    toward it; hybrid is the composition of both.  Bandwidth floors are
    enforced at the point of use (see ``world.latency_breakdown``), so
    scale factors here may legitimately be small but loads never go
    negative and scales never reach zero.
    """
    if effects is None:
        effects = AttackEffects()
    if not 0 <= t < trace.slots:
        raise ValueError(f"slot {t} out of range [0, {trace.slots})")
    active = trace.active(t)
    rsus = []
    for rsu in state.rsus:
        fresh = _clear_slot_effects(rsu)
        if active[rsu.id]:
            fresh = replace(fresh, under_attack=True)
            if scenario.kind in ("direct", "hybrid"):
                fresh = _apply_direct(fresh, scenario.intensity, effects)
            if scenario.kind in ("indirect", "hybrid"):
                fresh = _apply_indirect(fresh, scenario.intensity, effects)
        rsus.append(fresh)
    return replace(state, rsus=rsus)


def malicious_behavior(
    rsu: Rsu, profile: MaliciousProfile, rng: np.random.Generator
) -> tuple[int, float]:
    """One slot of packet behavior for a unit.

    Compromised units tamper with a random share of the slot's packets
    and slow down the work they serve; honest units emit only a small
    false-positive noise stream and run at full speed.
    """
    if rsu.is_malicious:
        abnormal = int(rng.binomial(profile.packets_per_slot, profile.tamper_probability))
        return abnormal, profile.delay_factor
    return int(rng.poisson(profile.honest_noise_mean)), 1.0


def ddos_frequency(trace: AttackTrace, rsu_id: int, t: int, window: int | None = None) -> int:
    """Number of attack events on ``rsu_id`` in the half-open window
    ``(t - window, t]``; zero before any attack."""
    if t < 0:
        raise ValueError("ddos_frequency: t must be >= 0")
    if window is None:
        window = trace.window
    lo = max(0, t - window + 1)
    hi = min(t, trace.slots - 1)
    if hi < lo:
        return 0
    return int(trace.events[lo : hi + 1, rsu_id].sum())
