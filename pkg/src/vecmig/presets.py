"""Experiment presets reproducing the six figure families.

Each preset owns an output directory keyed by its name, echoes the
effective config and the seed map into it, and writes one metrics CSV.
Identical seeds reproduce byte-identical files.

Preset map:

* ``rewards`` / ``latency``: train the shared-policy learner under the
  default attack scenario with periodic held-out evaluation; the four
  baselines are scored on the same held-out episodes.
* ``task_size_sweep``: train once per seed, then evaluate every policy
  at fixed agent sizes 25..200 MB.
* ``attack_type_sweep``: train once per seed under hybrid pressure,
  then evaluate every policy under each attack kind with paired seeds.
* ``per_attack_rewards``: one training run per attack kind with the
  same periodic evaluation as ``rewards``.
* ``trust_rates``: run the trust engine against a 20% malicious
  deployment for many episodes and log cumulative banning outcomes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import seeding
from .config import ExperimentConfig, load_config
from .env import MigrationEnv
from .mappo import baseline_policy, evaluate, learned_policy, train
from .metrics import MetricRecord, Stopwatch, write_metrics
from .nets import save_params
from .trust import TrustEngine, confusion_from_sets, confusion_rates

PRESET_NAMES = (
    "rewards",
    "latency",
    "task_size_sweep",
    "attack_type_sweep",
    "per_attack_rewards",
    "trust_rates",
)

BASELINES = ("random", "greedy", "full_premigration", "no_premigration")

TASK_SIZES = (25.0, 50.0, 100.0, 150.0, 200.0)
SWEEP_KINDS = ("none", "direct", "indirect", "hybrid")

#: Attack pressure shared by the training-figure presets.
DEFAULT_SCENARIO = {
    "kind": "direct",
    "intensity": 1.0,
    "target_fraction": 0.3,
    "per_slot_probability": 0.9,
}

#: The trust figure runs the ledger cumulatively with weak tampering so
#: banning evidence builds gradually across episodes.  Honest units
#: carry a noticeable monitor noise floor but out-earn it in completion
#: credit; compromised units slow their tasks past the acceptance
#: threshold and earn nothing, so their evidence drifts upward until
#: they cross the ban line one by one.  See README for the narrative.
TRUST_SCENARIO = {
    "attack": {
        "kind": "none",
        "malicious_fraction": 0.2,
        "honest_noise_mean": 2.0,
    },
    "trust": {
        "enabled": True,
        "reset_each_episode": False,
        "completion_weight": 0.3,
        "decay_weight": 1e-06,
        "initial_threshold": 0.6,
        "adapt_step": 0.1,
        "fbr_limit": 0.05,
        "mode": "corrected",
    },
    "world": {"latency_threshold": 8.0, "agent_size_range": [100.0, 200.0],
               "base_load_range": [100.0, 300.0]},
}

TRUST_EPISODES = 200


def _preset_config(name: str, overrides: dict | None) -> ExperimentConfig:
    config = load_config(None)
    if name in ("rewards", "latency", "task_size_sweep", "per_attack_rewards"):
        config = config.with_overrides({"attack": dict(DEFAULT_SCENARIO)})
    elif name == "attack_type_sweep":
        config = config.with_overrides(
            {"attack": {**DEFAULT_SCENARIO, "kind": "hybrid"}}
        )
    elif name == "trust_rates":
        config = config.with_overrides(json.loads(json.dumps(TRUST_SCENARIO)))
    if overrides:
        config = config.with_overrides(overrides)
    return config


def _prepare_run_dir(out_dir: Path, name: str, config: ExperimentConfig,
                     seeds) -> Path:
    run_dir = Path(out_dir) / name
    run_dir.mkdir(parents=True, exist_ok=True)
    from .config import echo_config

    echo_config(config, run_dir)
    seed_map = {str(s): seeding.seed_streams(s) for s in seeds}
    (run_dir / "seeds.json").write_text(json.dumps(seed_map, indent=2) + "\n")
    return run_dir


def _eval_seed(master_seed: int) -> int:
    return seeding.derive_seed(master_seed, "evaluation")


def _training_curves(config: ExperimentConfig, seed: int, run_dir: Path,
                     attack_label: str, episodes: int | None) -> list[MetricRecord]:
    """Train with periodic held-out evaluation; score baselines on the
    same held-out episodes; save the final checkpoint."""
    records: list[MetricRecord] = []
    run_id = f"seed{seed}"
    eval_seed = _eval_seed(seed)
    n_eval = config.ppo.eval_episodes

    def hook(episode: int, actor) -> dict:
        result = evaluate(learned_policy(actor), config, eval_seed, n_eval)
        records.append(MetricRecord(
            run_id=run_id, episode=episode, policy="mappo", attack=attack_label,
            mean_reward=result.mean_reward, mean_latency=result.mean_latency,
        ))
        return {"reward": result.mean_reward, "latency": result.mean_latency}

    outcome = train(config, seed, episodes=episodes, eval_hook=hook)
    checkpoints = run_dir / "checkpoints"
    checkpoints.mkdir(exist_ok=True)
    save_params(outcome.actor, checkpoints / f"actor-seed{seed}")
    save_params(outcome.critic, checkpoints / f"critic-seed{seed}")

    eval_episodes = sorted({r.episode for r in records if r.run_id == run_id})
    for kind in BASELINES:
        result = evaluate(baseline_policy(kind, seed=_eval_seed(seed + 1)),
                          config, eval_seed, n_eval)
        for episode in eval_episodes:
            records.append(MetricRecord(
                run_id=run_id, episode=episode, policy=kind, attack=attack_label,
                mean_reward=result.mean_reward, mean_latency=result.mean_latency,
            ))
    return records


def _policy_suite(actor):
    suite = {"mappo": learned_policy(actor)}
    for kind in BASELINES:
        suite[kind] = baseline_policy(kind, seed=1234)
    return suite


def run_preset(name: str, out_dir: str | Path, seeds=(0, 1, 2),
               overrides: dict | None = None,
               episodes: int | None = None) -> Path:
    """Run one preset and return the metrics CSV path."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    config = _preset_config(name, overrides)
    run_dir = _prepare_run_dir(Path(out_dir), name, config, seeds)
    watch = Stopwatch()
    records: list[MetricRecord] = []

    if name in ("rewards", "latency", "per_attack_rewards"):
        kinds = ([config.attack.kind] if name != "per_attack_rewards"
                 else ["direct", "indirect", "hybrid"])
        for kind in kinds:
            kind_config = config.with_overrides({"attack": {"kind": kind}})
            for seed in seeds:
                records.extend(_training_curves(kind_config, seed, run_dir,
                                                kind, episodes))
    elif name == "task_size_sweep":
        for seed in seeds:
            outcome = train(config, seed, episodes=episodes)
            suite = _policy_suite(outcome.actor)
            for size in TASK_SIZES:
                sized = config.with_overrides(
                    {"world": {"agent_size_range": [size, size]}}
                )
                for policy_name, policy in suite.items():
                    result = evaluate(policy, sized, _eval_seed(seed),
                                      config.ppo.eval_episodes)
                    records.append(MetricRecord(
                        run_id=f"seed{seed}-size{int(size)}", episode=0,
                        policy=policy_name, attack=config.attack.kind,
                        mean_reward=result.mean_reward,
                        mean_latency=result.mean_latency,
                    ))
    elif name == "attack_type_sweep":
        for seed in seeds:
            outcome = train(config, seed, episodes=episodes)
            suite = _policy_suite(outcome.actor)
            for kind in SWEEP_KINDS:
                swept = config.with_overrides({"attack": {"kind": kind}})
                for policy_name, policy in suite.items():
                    result = evaluate(policy, swept, _eval_seed(seed),
                                      config.ppo.eval_episodes)
                    records.append(MetricRecord(
                        run_id=f"seed{seed}", episode=0, policy=policy_name,
                        attack=kind, mean_reward=result.mean_reward,
                        mean_latency=result.mean_latency,
                    ))
    elif name == "trust_rates":
        n_episodes = episodes if episodes is not None else TRUST_EPISODES
        for seed in seeds:
            records.extend(_trust_run(config, seed, run_dir, n_episodes))

    csv_path = run_dir / "metrics.csv"
    write_metrics(records, csv_path)
    watch.dump(run_dir, preset=name, seeds=list(seeds))
    return csv_path


def _trust_run(config: ExperimentConfig, seed: int, run_dir: Path,
               n_episodes: int) -> list[MetricRecord]:
    """Trust assessment against ground truth over many episodes.

    Ban decisions are made per episode from the (cumulative) ledger;
    the reported rates pool decisions across all episodes so far, which
    is what the banning-rate convergence figure plots.
    """
    engine = TrustEngine(config.world.rsus, config.trust,
                         abnormal_threshold=config.attack.abnormal_threshold)
    env = MigrationEnv(config, seed, trust_engine=engine)
    policy = baseline_policy("no_premigration")
    flags = [bool(b) for b in env.malicious_mask]
    pooled = None
    records: list[MetricRecord] = []
    trust_rows = ["episode,rsu,score,banned,threshold,fbr,br"]
    run_id = f"seed{seed}"
    for episode in range(n_episodes):
        obs = env.reset(episode)
        rewards, latencies = [], []
        while not env.done:
            obs, reward, record = env.step(policy(obs, env))
            rewards.append(reward)
            latencies.extend(v.latency.total for v in record.vehicles)
        confusion = confusion_from_sets(engine.banned, flags)
        pooled = confusion if pooled is None else pooled + confusion
        fbr, br = confusion_rates(pooled)
        threshold = engine.threshold
        for rsu_id in range(config.world.rsus):
            trust_rows.append(
                f"{episode},{rsu_id},{engine.malicious_score(rsu_id):.9g},"
                f"{int(rsu_id in engine.banned)},{threshold:.9g},{fbr:.9g},{br:.9g}"
            )
        engine.adapt_threshold(confusion)
        records.append(MetricRecord(
            run_id=run_id, episode=episode, policy="no_premigration",
            attack=config.attack.kind,
            mean_reward=float(np.mean(rewards)),
            mean_latency=float(np.mean(latencies)),
            fbr=fbr, br=br,
        ))
    (run_dir / f"trust-{run_id}.csv").write_text("\n".join(trust_rows) + "\n",
                                                 newline="\n")
    return records
