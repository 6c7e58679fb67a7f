"""Command-line surface: train, evaluate, preset, sweep.

Failures print one machine-readable line (``ERROR {json}``) to stderr
and exit nonzero; success exits 0.  Config values come from defaults,
then the ``--config`` file, then ``VECMIG_<SECTION>__<KEY>``
environment variables, then explicit flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import seeding
from .config import ConfigError, ExperimentConfig, echo_config, load_config
from .mappo import BASELINE_KINDS, baseline_policy, evaluate, learned_policy, train
from .metrics import MetricRecord, Stopwatch, write_metrics
from .nets import load_params, save_params
from .presets import PRESET_NAMES, TASK_SIZES, run_preset


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vecmig",
        description="Seeded simulator of agent-service migration across "
                    "roadside units under attack, with a multi-agent PPO "
                    "pre-migration trainer and a trust engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config file (defaults when omitted)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=Path, default=Path("runs"))
        p.add_argument("--episodes", type=int, default=None)
        p.add_argument("--attack", choices=("none", "direct", "indirect", "hybrid"),
                       default=None)
        p.add_argument("--trust-mode", choices=("corrected", "paper_verbatim"),
                       default=None)

    p_train = sub.add_parser("train", help="train the shared policy")
    common(p_train)

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint or baseline")
    common(p_eval)
    p_eval.add_argument("--policy", default="no_premigration",
                        help=f"checkpoint path or one of {BASELINE_KINDS}")
    p_eval.add_argument("--eval-episodes", type=int, default=10)

    p_preset = sub.add_parser("preset", help="run an experiment preset")
    common(p_preset)
    p_preset.add_argument("name", choices=PRESET_NAMES)
    p_preset.add_argument("--seeds", type=str, default=None,
                          help="comma-separated master seeds (default: --seed)")

    p_sweep = sub.add_parser("sweep", help="run the size or attack sweep")
    common(p_sweep)
    p_sweep.add_argument("--over", choices=("sizes", "attacks"), default="sizes")
    p_sweep.add_argument("--seeds", type=str, default=None)
    return parser


def _apply_flags(config: ExperimentConfig, args) -> ExperimentConfig:
    overrides: dict = {}
    if args.attack is not None:
        overrides.setdefault("attack", {})["kind"] = args.attack
    if args.trust_mode is not None:
        overrides.setdefault("trust", {})["mode"] = args.trust_mode
    if getattr(args, "episodes", None) is not None:
        overrides.setdefault("ppo", {})["episodes"] = args.episodes
    return config.with_overrides(overrides) if overrides else config


def _seeds(args) -> tuple[int, ...]:
    raw = getattr(args, "seeds", None)
    if raw:
        return tuple(int(s) for s in raw.split(","))
    return (args.seed,)


def _cmd_train(args) -> int:
    config = _apply_flags(load_config(args.config), args)
    out = Path(args.out) / f"train-seed{args.seed}"
    out.mkdir(parents=True, exist_ok=True)
    echo_config(config, out)
    (out / "seeds.json").write_text(
        json.dumps(seeding.seed_streams(args.seed), indent=2) + "\n")
    watch = Stopwatch()
    result = train(config, args.seed)
    save_params(result.actor, out / "actor")
    save_params(result.critic, out / "critic")
    records = [
        MetricRecord(run_id=f"seed{args.seed}", episode=m["episode"],
                     policy="mappo", attack=config.attack.kind,
                     mean_reward=m["mean_reward"], mean_latency=m["mean_latency"])
        for m in result.episode_metrics
    ]
    path = write_metrics(records, out / "metrics.csv")
    watch.dump(out, command="train")
    print(f"trained {len(result.episode_metrics)} episodes -> {path}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _apply_flags(load_config(args.config), args)
    if args.policy in BASELINE_KINDS:
        policy = baseline_policy(args.policy, seed=args.seed)
        name = args.policy
    else:
        actor = load_params(args.policy)
        policy = learned_policy(actor)
        name = "mappo"
    result = evaluate(policy, config, args.seed, args.eval_episodes)
    out = Path(args.out) / f"evaluate-{name}-seed{args.seed}"
    out.mkdir(parents=True, exist_ok=True)
    echo_config(config, out)
    records = [
        MetricRecord(run_id=f"seed{args.seed}", episode=i, policy=name,
                     attack=config.attack.kind, mean_reward=r, mean_latency=l)
        for i, (r, l) in enumerate(result.per_episode)
    ]
    path = write_metrics(records, out / "metrics.csv")
    print(f"{name}: mean reward {result.mean_reward:.6g}, "
          f"mean latency {result.mean_latency:.6g} s -> {path}")
    return 0


def _cmd_preset(args) -> int:
    overrides: dict = {}
    if args.attack is not None:
        overrides.setdefault("attack", {})["kind"] = args.attack
    if args.trust_mode is not None:
        overrides.setdefault("trust", {})["mode"] = args.trust_mode
    if args.config is not None:
        file_config = json.loads(Path(args.config).read_text() or "{}")
        for key, value in file_config.items():
            overrides.setdefault(key, {}).update(value)
    path = run_preset(args.name, args.out, seeds=_seeds(args),
                      overrides=overrides or None, episodes=args.episodes)
    print(f"preset {args.name} -> {path}")
    return 0


def _cmd_sweep(args) -> int:
    name = "task_size_sweep" if args.over == "sizes" else "attack_type_sweep"
    args.name = name
    return _cmd_preset(args)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "evaluate": _cmd_evaluate,
        "preset": _cmd_preset,
        "sweep": _cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print("ERROR " + json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
