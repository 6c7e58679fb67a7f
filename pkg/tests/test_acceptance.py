"""Acceptance suite: every exit criterion with its stated tolerance.

Each test prints one PASS/FAIL line.  The heavyweight experiment runs
(training curves, sweeps, trust convergence) execute once per session
through module-scoped fixtures and are shared by the criteria that read
the same outputs.

Oracles here are independent of the code under test: mpmath scalar
re-derivations for the closed-form operations, central finite
differences for gradients, and recomputation from exported files for
the run-level checks.
"""

import math

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from vecmig import autodiff as ad
from vecmig.config import ExperimentConfig, PpoConfig, WorldConfig, load_config
from vecmig.env import MigrationEnv, utility_value
from vecmig.mappo import (
    Batch,
    advantage,
    baseline_policy,
    clipped_surrogate,
    evaluate,
    q_and_v,
    ratio_and_clip,
    total_loss_graph,
)
from vecmig.metrics import read_metrics
from vecmig.nets import (
    NetworkParams,
    as_tensors,
    entropy,
    finite_difference_check,
    forward,
    gradient,
    init_network,
    policy_distribution,
)
from vecmig.presets import run_preset
from vecmig.trust import ConfusionCounts, TrustEngine, confusion_rates
from vecmig.world import (
    ChannelParams,
    MigrationDecision,
    Rsu,
    Vehicle,
    channel_gain,
    distance,
    latency_breakdown,
    link_rate,
    premigration_split,
)
from vecmig.config import TrustConfig

mp.mp.dps = 50

RELTOL = 1e-9
N_RANDOM = 120


def report(name: str, passed: bool, detail: str = "") -> None:
    marker = "PASS" if passed else "FAIL"
    print(f"[{marker}] {name}" + (f" ({detail})" if detail else ""))
    assert passed, f"{name}: {detail}"


def rel_err(got: float, want: float) -> float:
    denominator = max(abs(want), 1e-300)
    return abs(got - want) / denominator


# -- criterion 1: equation oracle suite --------------------------------------


class TestEquationOracles:
    """Closed-form operations against mpmath re-derivations on >= 100
    randomized small inputs each, within 1e-9 relative error."""

    rng = np.random.default_rng(20240817)

    def test_geometry_and_channel(self):
        worst = 0.0
        params = ChannelParams()
        for _ in range(N_RANDOM):
            ax, ay, bx, by = self.rng.uniform(-5000, 5000, size=4)
            want = mp.sqrt((mp.mpf(ax) - mp.mpf(bx)) ** 2 + (mp.mpf(ay) - mp.mpf(by)) ** 2)
            worst = max(worst, rel_err(distance((ax, ay), (bx, by)), float(want)))

            d = float(self.rng.uniform(1.0, 3000.0))
            want_gain = mp.mpf(params.gain_coefficient) * (
                mp.mpf(params.light_speed)
                / (4 * mp.pi * mp.mpf(params.carrier_frequency) * mp.mpf(d))
            ) ** 2
            worst = max(worst, rel_err(channel_gain(d, params), float(want_gain)))

            gain = float(self.rng.uniform(1e-14, 1e-9))
            power = float(self.rng.uniform(0.01, 1.0))
            noise = float(self.rng.uniform(1e-14, 1e-12))
            bw = float(self.rng.uniform(1e6, 3e8))
            want_rate = mp.mpf(bw) * mp.log(1 + mp.mpf(power) * mp.mpf(gain) / mp.mpf(noise), 2)
            worst = max(worst, rel_err(link_rate(gain, power, noise, bw), float(want_rate)))
        report("equation oracle: distance/gain/rate", worst <= RELTOL,
               f"max rel err {worst:.2e}")

    def test_latency_model(self):
        worst = 0.0
        for _ in range(N_RANDOM):
            channel = ChannelParams(
                uplink_bandwidth=float(self.rng.uniform(1e8, 2e8)),
                downlink_bandwidth=float(self.rng.uniform(1e8, 2e8)),
            )
            vehicle = Vehicle(
                id=0, position=(float(self.rng.uniform(0, 2000)), 0.0),
                agent_size=float(self.rng.uniform(25, 200)),
                upload_size=float(self.rng.uniform(5, 40)),
            )
            current = Rsu(id=0, position=(float(self.rng.uniform(0, 2000)), 20.0),
                          compute_capacity=float(self.rng.uniform(100, 300)),
                          base_load=float(self.rng.uniform(0, 300)),
                          inter_bandwidth=float(self.rng.uniform(250, 2000)))
            nxt = Rsu(id=1, position=(float(self.rng.uniform(0, 2000)), 20.0),
                      compute_capacity=float(self.rng.uniform(100, 300)),
                      base_load=float(self.rng.uniform(0, 300)),
                      inter_bandwidth=float(self.rng.uniform(250, 2000)))
            gamma = int(self.rng.integers(0, 2))
            sigma = float(self.rng.uniform(0, 1))
            decision = MigrationDecision(gamma, sigma)
            got = latency_breakdown(vehicle, current, nxt, decision, channel)

            # independent scalar re-derivation
            def rate(rsu, bw):
                d = max(mp.sqrt((mp.mpf(vehicle.position[0]) - rsu.position[0]) ** 2
                                + (mp.mpf(vehicle.position[1]) - rsu.position[1]) ** 2),
                        mp.mpf(1))
                g = mp.mpf(channel.gain_coefficient) * (
                    mp.mpf(channel.light_speed)
                    / (4 * mp.pi * mp.mpf(channel.carrier_frequency) * d)) ** 2
                return mp.mpf(bw) * mp.log(
                    1 + mp.mpf(vehicle.transmit_power) * g / mp.mpf(vehicle.noise_power), 2)

            s = mp.mpf(vehicle.agent_size)
            mig_size = mp.mpf(sigma) * s if gamma else mp.mpf(0)
            up = mp.mpf(vehicle.upload_size) * mp.mpf(8e6) / rate(current, channel.uplink_bandwidth)
            mig = mig_size * 8 / mp.mpf(nxt.inter_bandwidth) if gamma else mp.mpf(0)
            proc_cur = (mp.mpf(current.load) + s - mig_size) / mp.mpf(current.compute_capacity)
            if gamma:
                proc_next = (mp.mpf(nxt.load) + mig_size) / mp.mpf(nxt.compute_capacity)
                proc_total = proc_cur if proc_cur < proc_next else proc_next + mig
            else:
                proc_total = proc_cur
            down = (s - mig_size) * mp.mpf(8e6) / rate(current, channel.downlink_bandwidth)
            if gamma and mig_size > 0:
                down += mig_size * mp.mpf(8e6) / rate(nxt, channel.downlink_bandwidth)
            total = up + proc_total + down

            mg, dc, dn = premigration_split(vehicle.agent_size, decision)
            worst = max(worst, rel_err(mg + dc + dn,
                                       float(mig_size + s)))
            worst = max(worst, rel_err(got.up, float(up)))
            worst = max(worst, rel_err(got.mig, float(mig)) if gamma else 0.0)
            worst = max(worst, rel_err(got.proc_total, float(proc_total)))
            worst = max(worst, rel_err(got.down, float(down)))
            worst = max(worst, rel_err(got.total, float(total)))
        report("equation oracle: split and latency components", worst <= RELTOL,
               f"max rel err {worst:.2e}")

    def test_utility_and_reward(self):
        from vecmig.config import UtilityConfig

        worst = 0.0
        for _ in range(N_RANDOM):
            lam, beta, mu = self.rng.uniform(0.01, 3.0, size=3)
            served = int(self.rng.integers(0, 21))
            attacked = int(self.rng.integers(0, served + 1))
            lat = float(self.rng.uniform(0, 40))
            got = utility_value(served, lat, attacked,
                                UtilityConfig(float(lam), float(beta), float(mu)))
            want = mp.mpf(lam) * served - mp.mpf(beta) * mp.mpf(lat) - mp.mpf(mu) * attacked
            worst = max(worst, rel_err(got, float(want)))
        report("equation oracle: per-vehicle utility", worst <= RELTOL,
               f"max rel err {worst:.2e}")

    def test_surrogate_value_and_advantage(self):
        worst = 0.0
        for _ in range(N_RANDOM):
            n = int(self.rng.integers(1, 6))
            ratios = self.rng.uniform(0.5, 1.5, size=n)
            advs = self.rng.normal(size=n)
            eps = float(self.rng.uniform(0.01, 0.3))
            got = clipped_surrogate(ratios, advs, eps)
            want = sum(
                min(mp.mpf(r) * mp.mpf(a),
                    mp.mpf(min(max(r, 1 - eps), 1 + eps)) * mp.mpf(a))
                for r, a in zip(ratios, advs)
            ) / n
            worst = max(worst, rel_err(got, float(want)))

            r, clipped = ratio_and_clip(float(ratios[0]), 1.0, eps)
            want_clip = min(max(mp.mpf(ratios[0]), 1 - mp.mpf(eps)), 1 + mp.mpf(eps))
            worst = max(worst, rel_err(clipped, float(want_clip)))

            q = self.rng.normal(size=n)
            adv = advantage(q)
            want_adv = [mp.mpf(v) - sum(map(mp.mpf, q)) / n for v in q]
            for g, w in zip(adv, want_adv):
                worst = max(worst, rel_err(g, float(w)) if w != 0 else abs(g - float(w)))

            probs = self.rng.dirichlet(np.ones(n))
            actor = NetworkParams([np.zeros((3, n))], [np.log(probs + 1e-12)])
            critic = NetworkParams([np.zeros((3, n))], [q.astype(float)])
            _, v = q_and_v(critic, actor, np.zeros((1, 3)))
            soft = [mp.e ** mp.mpf(b) for b in np.log(probs + 1e-12)]
            z = sum(soft)
            want_v = sum((p / z) * mp.mpf(qq) for p, qq in zip(soft, q))
            worst = max(worst, rel_err(float(v[0]), float(want_v)))
        report("equation oracle: surrogate/clip/advantage/value", worst <= RELTOL,
               f"max rel err {worst:.2e}")

    def test_trust_scoring_and_rates(self):
        worst = 0.0
        for trial in range(N_RANDOM):
            slots = int(self.rng.integers(1, 15))
            weights = self.rng.uniform(0.01, 1.0, size=3)
            engine = TrustEngine(1, TrustConfig(
                enabled=True, detection_weight=float(weights[0]),
                completion_weight=float(weights[1]), decay_weight=float(weights[2]),
                initial_threshold=100.0,
            ), abnormal_threshold=2)
            engine.start_episode()
            events = []
            ok = total = 0
            for t in range(1, slots + 1):
                abnormal = int(self.rng.integers(0, 6))
                conns = int(self.rng.integers(0, 4))
                on_time = bool(self.rng.integers(0, 2))
                engine.observe_slot([abnormal], [(0, 1.0 if on_time else 9.0, 2.0)], [conns])
                total += 1
                ok += on_time
                events.append((abnormal, conns, mp.mpf(ok) / total))
            want = (mp.mpf(float(weights[0])) * sum(1 for a, _, _ in events if a > 2)
                    - mp.mpf(float(weights[1])) * sum(mp.mpf(c) * xi for _, c, xi in events)
                    - mp.mpf(float(weights[2])) * sum(range(1, slots + 1)))
            worst = max(worst, rel_err(engine.malicious_score(0), float(want))
                        if want != 0 else abs(engine.malicious_score(0) - float(want)))

            tp, tn, fp, fn = (int(x) for x in self.rng.integers(0, 10, size=4))
            fbr, br = confusion_rates(ConfusionCounts(tp, tn, fp, fn))
            want_fbr = mp.mpf(fp) / (fp + tn) if fp + tn else mp.mpf(0)
            want_br = mp.mpf(tp) / (tp + fn) if tp + fn else mp.mpf(0)
            worst = max(worst, rel_err(fbr, float(want_fbr)) if want_fbr else abs(fbr))
            worst = max(worst, rel_err(br, float(want_br)) if want_br else abs(br))
        report("equation oracle: trust scoring and ban rates", worst <= RELTOL,
               f"max rel err {worst:.2e}")


# -- criterion 2: gradient acceptance ----------------------------------------


class TestGradientAcceptance:
    def test_composite_loss_matches_central_differences(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for trial in range(3):
            actor = init_network([4, 8, 2], seed=100 + trial)
            critic = init_network([4, 8, 2], seed=200 + trial)
            hyper = PpoConfig(clip=0.05, value_coef=0.5, entropy_coef=0.01)
            batch = Batch(
                obs=rng.normal(size=(4, 4)),
                actions=rng.integers(0, 2, size=4),
                old_probs=rng.uniform(0.3, 0.7, size=4),
                returns=rng.normal(size=4),
                advantages=rng.normal(size=4),
            )
            combined = NetworkParams(actor.weights + critic.weights,
                                     actor.biases + critic.biases)
            n_actor = len(actor.weights)

            def loss(layers):
                return total_loss_graph(batch, layers[:n_actor], layers[n_actor:], hyper)

            result = finite_difference_check(loss, combined, tolerance=1e-4, h=1e-5)
            worst = max(worst, result.max_relative_error)
        report("gradient acceptance: composite loss vs central differences",
               worst <= 1e-4, f"max rel err {worst:.2e} over "
               f"{result.checked_coordinates} coordinates x 3 batches")


# -- criteria 3-6, 8, 9: experiment runs -------------------------------------

POLICIES = ("mappo", "random", "greedy", "full_premigration", "no_premigration")


def final_window_stats(rows, policies, seeds, by="policy"):
    out = {}
    for pol in policies:
        rewards, latencies = [], []
        for seed in seeds:
            eps = sorted({r["episode"] for r in rows
                          if r["policy"] == pol and r["run_id"] == f"seed{seed}"})
            window = set(eps[-max(1, len(eps) // 10):])
            sel = [r for r in rows if r["policy"] == pol
                   and r["run_id"] == f"seed{seed}" and r["episode"] in window]
            rewards.append(np.mean([r["mean_reward"] for r in sel]))
            latencies.append(np.mean([r["mean_latency"] for r in sel]))
        out[pol] = (float(np.mean(rewards)), float(np.mean(latencies)))
    return out


@pytest.fixture(scope="module")
def rewards_rows(tmp_path_factory):
    out = tmp_path_factory.mktemp("rewards")
    csv = run_preset("rewards", out, seeds=(0, 1, 2))
    return read_metrics(csv)


@pytest.fixture(scope="module")
def size_rows(tmp_path_factory):
    out = tmp_path_factory.mktemp("sizes")
    csv = run_preset("task_size_sweep", out, seeds=(0, 1, 2))
    return read_metrics(csv)


@pytest.fixture(scope="module")
def attack_rows(tmp_path_factory):
    out = tmp_path_factory.mktemp("attacks")
    csv = run_preset("attack_type_sweep", out, seeds=(0, 1, 2))
    return read_metrics(csv)


class TestLearningAcceptance:
    def test_reward_gaps(self, rewards_rows):
        final = final_window_stats(rewards_rows, POLICIES, (0, 1, 2))
        mappo_reward = final["mappo"][0]
        needs = {"random": 0.30, "greedy": 0.30,
                 "full_premigration": 0.15, "no_premigration": 0.15}
        gaps = {}
        for pol, need in needs.items():
            base = final[pol][0]
            gaps[pol] = (mappo_reward - base) / abs(base)
        passed = all(gaps[p] >= needs[p] for p in needs)
        direction = all(gaps[p] > 0 for p in needs)
        detail = ", ".join(f"{p}: {gaps[p]:+.1%} (need {needs[p]:.0%})" for p in needs)
        report("learning acceptance: final-window reward gaps",
               passed and direction, detail)

    def test_latency_reduction(self, rewards_rows):
        final = final_window_stats(rewards_rows, POLICIES, (0, 1, 2))
        mappo_latency = final["mappo"][1]
        best_baseline = min(final[p][1] for p in POLICIES[1:])
        ratio = mappo_latency / best_baseline
        report("latency acceptance: final-window latency vs best baseline",
               ratio <= 0.85, f"ratio {ratio:.3f} (need <= 0.85)")


class TestTaskSizeMonotonicity:
    def test_latency_nondecreasing_in_size(self, size_rows):
        sizes = (25, 50, 100, 150, 200)
        violations = {}
        for pol in POLICIES:
            count = 0
            for seed in (0, 1, 2):
                series = [
                    np.mean([r["mean_latency"] for r in size_rows
                             if r["policy"] == pol
                             and r["run_id"] == f"seed{seed}-size{s}"])
                    for s in sizes
                ]
                count += sum(1 for a, b in zip(series, series[1:]) if b < a)
            violations[pol] = count
        # tolerated: <= 1 adjacent-pair violation per policy across seeds
        passed = all(v <= 1 for v in violations.values())
        report("task-size monotonicity", passed, str(violations))


class TestAttackTypeOrdering:
    def test_learner_lowest_under_every_kind(self, attack_rows):
        kinds = ("direct", "indirect", "hybrid")
        failures = []
        for kind in kinds:
            lat = {
                pol: np.mean([r["mean_latency"] for r in attack_rows
                              if r["policy"] == pol and r["attack"] == kind])
                for pol in POLICIES
            }
            best = min(lat, key=lat.get)
            if best != "mappo":
                failures.append((kind, best))
        report("attack ordering: learner lowest under every kind",
               not failures, str(failures) if failures else "all kinds")

    def test_hybrid_at_least_each_component(self, attack_rows):
        failures = []
        for pol in POLICIES:
            lat = {
                kind: np.mean([r["mean_latency"] for r in attack_rows
                               if r["policy"] == pol and r["attack"] == kind])
                for kind in ("direct", "indirect", "hybrid")
            }
            if lat["hybrid"] < max(lat["direct"], lat["indirect"]) - 1e-9:
                failures.append((pol, lat))
        report("attack ordering: hybrid >= max(direct, indirect) per policy",
               not failures, str(failures) if failures else "all policies")


# -- criterion 7: trust convergence ------------------------------------------


class TestTrustAcceptance:
    def test_banning_rates_converge(self, tmp_path):
        csv = run_preset("trust_rates", tmp_path, seeds=(0,), episodes=200)
        rows = read_metrics(csv)
        fbr = np.array([r["fbr"] for r in rows])
        br = np.array([r["br"] for r in rows])
        episodes = np.arange(len(fbr))
        tail = slice(-len(fbr) // 5, None)
        rho_fbr, _ = stats.spearmanr(episodes, fbr)
        rho_br, _ = stats.spearmanr(episodes, br)
        checks = {
            "final BR >= 0.9": br[tail].mean() >= 0.9,
            "final FBR <= 0.1": fbr[tail].mean() <= 0.1,
            "FBR trend negative": rho_fbr < 0,
            "BR trend positive": rho_br > 0,
        }
        report("trust acceptance: banning-rate convergence",
               all(checks.values()),
               f"BR tail {br[tail].mean():.3f}, FBR tail {fbr[tail].mean():.3f}, "
               f"rho(FBR) {rho_fbr:.2f}, rho(BR) {rho_br:.2f}")


# -- criterion 8: determinism -------------------------------------------------


class TestDeterminism:
    TINY = {
        "world": {"vehicles": 3, "rsus": 3, "slots": 4, "road_length": 3000.0},
        "ppo": {"episodes": 4, "epochs": 1, "critic_warmup_epochs": 1,
                "batch_size": 12, "hidden": [8, 8], "eval_every": 2,
                "eval_episodes": 1},
    }

    def test_preset_reruns_byte_identical(self, tmp_path):
        pairs = []
        for name, episodes in (("rewards", 4), ("trust_rates", 5)):
            a = run_preset(name, tmp_path / f"{name}-a", seeds=(0,),
                           overrides=self.TINY, episodes=episodes)
            b = run_preset(name, tmp_path / f"{name}-b", seeds=(0,),
                           overrides=self.TINY, episodes=episodes)
            pairs.append((name, a.read_bytes() == b.read_bytes()))
        report("determinism: preset reruns byte-identical",
               all(ok for _, ok in pairs), str(pairs))


# -- criterion 9: attack-impact sanity ----------------------------------------


class TestAttackImpactSanity:
    def test_direct_attack_strictly_increases_latency(self):
        base = load_config(None)
        quiet = base.with_overrides({"attack": {"kind": "none"}})
        attacked = base.with_overrides({
            "attack": {"kind": "direct", "intensity": 1.0,
                       "target_fraction": 0.3, "per_slot_probability": 0.9},
        })
        policy = baseline_policy("no_premigration")
        seeds_worse = [
            evaluate(policy, attacked, seed, 1).mean_latency
            > evaluate(policy, quiet, seed, 1).mean_latency
            for seed in range(10)
        ]
        report("attack-impact sanity: direct attacks raise latency (paired)",
               all(seeds_worse), f"{sum(seeds_worse)}/10 episodes worse")
