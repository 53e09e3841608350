"""Command line entry points: train, export, space, inspect, serve.

Exit codes: 0 on success, 1 on runtime errors (missing files, aborted
training), 2 on usage errors (argparse's convention).
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from .agent import (
    HyperParams,
    TrainingAborted,
    episode_seed,
    qtable_stats,
    run_training,
    select_action,
)
from .midi import export_midi
from .persist import MODEL_SUFFIX, ModelFile, PersistError, load_model, save_model
from .rater import simulated_rater
from .track import GenConfig, apply_action, encode_state, init_track, state_space_size


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("generation")
    group.add_argument("--base-note", default="C4", help="scale root, e.g. C4 or F#3")
    group.add_argument(
        "--scale-type", default="major", choices=("major", "minor", "diminished")
    )
    group.add_argument("--track-length", type=int, default=8, help="melody slots")
    group.add_argument("--tempo-bpm", type=int, default=120)
    group.add_argument("--volume", type=int, default=100, help="MIDI velocity 0..127")
    group.add_argument(
        "--seed", type=int, default=0, help="seed for both track generation and the policy"
    )


def _add_hyperparam_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("learning")
    group.add_argument("--alpha", type=float, default=0.1, help="learning rate")
    group.add_argument("--gamma", type=float, default=0.9, help="discount factor")
    group.add_argument("--epsilon", type=float, default=0.5, help="exploration rate")
    group.add_argument("--episodes", type=int, default=10)
    group.add_argument(
        "--steps-per-episode", type=int, default=None, help="default: one pass over the track"
    )


def _build_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> GenConfig:
    config = GenConfig(
        base_note=args.base_note,
        scale_type=args.scale_type,
        track_length=args.track_length,
        tempo_bpm=args.tempo_bpm,
        volume=args.volume,
        seed=args.seed,
    )
    try:
        config.validate()
    except ValueError as exc:
        parser.error(str(exc))
    return config


def _build_hyperparams(args: argparse.Namespace, parser: argparse.ArgumentParser) -> HyperParams:
    hp = HyperParams(
        alpha=args.alpha,
        gamma=args.gamma,
        epsilon=args.epsilon,
        episodes=args.episodes,
        steps_per_episode=args.steps_per_episode,
        seed=args.seed,
    )
    try:
        hp.validate()
    except ValueError as exc:
        parser.error(str(exc))
    return hp


def _stdin_rater(track) -> int:
    line = sys.stdin.readline()
    if not line:
        raise ValueError("ran out of ratings on stdin")
    value = int(line.strip())
    if not 1 <= value <= 10:
        raise ValueError(f"rating {value} out of range [1, 10]")
    return value


def cmd_train(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    config = _build_config(args, parser)
    hp = _build_hyperparams(args, parser)
    provider = _stdin_rater if args.rate_stdin else simulated_rater
    try:
        q, log = run_training(config, hp, provider)
    except TrainingAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for index, mean in enumerate(log.episode_means, start=1):
        print(f"episode {index}: mean reward {mean:.3f}")
    csv_path = Path(args.out_csv)
    model_path = Path(args.out_model)
    try:
        csv_path.write_text(log.to_csv(), encoding="utf-8")
        model = ModelFile(
            config=config,
            hyperparams=hp,
            qtable=q,
            episodes_completed=hp.episodes,
            total_steps=len(log.records),
        )
        save_model(model_path, model)
    except (OSError, PersistError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote model to {model_path}")
    print(f"wrote training log to {csv_path}")
    return 0


def cmd_export(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.model is not None:
        try:
            model = load_model(args.model)
        except (PersistError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        config = model.config
        hp = model.hyperparams
        track = init_track(config, random.Random(config.seed))
        rng = random.Random(episode_seed(hp.seed, model.episodes_completed))
        cursor = 0
        for step in range(hp.steps_for(config)):
            state = encode_state(track, cursor)
            action, _ = select_action(model.qtable, state, 0.0, rng)
            track = apply_action(track, cursor, action)
            cursor = (step + 1) % config.track_length
    else:
        config = _build_config(args, parser)
        track = init_track(config, random.Random(config.seed))
    out = Path(args.out)
    try:
        out.write_bytes(export_midi(track, config))
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def cmd_space(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        size = state_space_size(
            args.scale_size,
            args.melody_len,
            rhythm_factor=args.rhythm_factor,
            perc_pitch_count=args.perc_pitches,
            perc_slots=args.perc_slots,
        )
    except ValueError as exc:
        parser.error(str(exc))
    print(size)
    return 0


def cmd_inspect(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        model = load_model(args.model)
    except (PersistError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    config = model.config
    hp = model.hyperparams
    print(f"model: {args.model}")
    print(f"format_version: {model.format_version}")
    print(
        f"config: base_note={config.base_note} scale_type={config.scale_type}"
        f" track_length={config.track_length} tempo_bpm={config.tempo_bpm}"
        f" volume={config.volume} seed={config.seed}"
    )
    print(
        f"hyperparams: alpha={hp.alpha} gamma={hp.gamma} epsilon={hp.epsilon}"
        f" episodes={hp.episodes} steps_per_episode={hp.steps_per_episode} seed={hp.seed}"
    )
    print(f"episodes_completed: {model.episodes_completed}")
    print(f"total_steps: {model.total_steps}")
    for key, value in qtable_stats(model.qtable).items():
        print(f"{key}: {value}")
    return 0


def cmd_serve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    from . import service

    service.run(
        host=args.host,
        port=args.port,
        state_dir=args.state_dir,
        models_dir=args.models_dir,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmuse",
        description="Human-in-the-loop Q-learning music generation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model with the simulated rater")
    _add_config_flags(p_train)
    _add_hyperparam_flags(p_train)
    p_train.add_argument(
        "--rate-stdin",
        action="store_true",
        help="read one rating (1..10) per line from stdin instead of the simulated rater",
    )
    p_train.add_argument("--out-model", default="model" + MODEL_SUFFIX)
    p_train.add_argument("--out-csv", default="training_log.csv")
    p_train.set_defaults(func=cmd_train)

    p_export = sub.add_parser("export", help="write a track as a MIDI file")
    _add_config_flags(p_export)
    p_export.add_argument(
        "--model",
        default=None,
        help="model file to roll out greedily; generation flags are taken from it",
    )
    p_export.add_argument("--out", default="track.mid")
    p_export.set_defaults(func=cmd_export)

    p_space = sub.add_parser("space", help="print the exact state-space size")
    p_space.add_argument("--scale-size", type=int, default=7)
    p_space.add_argument("--melody-len", type=int, default=8)
    p_space.add_argument("--rhythm-factor", type=int, default=1)
    p_space.add_argument("--perc-pitches", type=int, default=1)
    p_space.add_argument("--perc-slots", type=int, default=0)
    p_space.set_defaults(func=cmd_space)

    p_inspect = sub.add_parser("inspect", help="print a model's stats and settings")
    p_inspect.add_argument("model")
    p_inspect.set_defaults(func=cmd_inspect)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--state-dir", default="qmuse-state")
    p_serve.add_argument("--models-dir", default=None)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())
