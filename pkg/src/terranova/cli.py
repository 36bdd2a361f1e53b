"""Operator command line: map corpus generation, self-play runs, replay
analysis, and the session service.

Every command is deterministic given its flags and seed. Exit codes:
0 success, 2 usage errors (argparse), 1 runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import mapgen, replay as replay_mod, runtime
from .policies import make_policy
from .serialize import load_gamestate, save_gamestate, state_digest, state_to_json
from .state import GameConfig


class NoMapsFound(FileNotFoundError):
    pass


def _env_seed(default: int = 0) -> int:
    return int(os.environ.get("TERRA_SEED", str(default)))


def _env_strategy() -> str:
    workers = os.environ.get("TERRA_WORKERS")
    return f"worker-pool({workers})" if workers else "serial"


def cmd_genmaps(args) -> int:
    config = GameConfig(map_width=args.width, map_height=args.height)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    failures = 0
    for i in range(args.count):
        seed = args.seed + i
        try:
            game_map = mapgen.generate_map(seed, config)
        except mapgen.GenerationFailed as err:
            print(f"seed {seed}: generation failed: {err}", file=sys.stderr)
            failures += 1
            continue
        state = mapgen.new_game(game_map, config, seed)
        path = os.path.join(args.out, f"map_{seed}.gamestate")
        save_gamestate(state, path)
        rows.append(mapgen.balance_report(game_map, config.rule_tables).to_row())
        if args.json_export:
            with open(path.replace(".gamestate", ".json"), "w") as f:
                json.dump(state_to_json(state), f)
    if rows:
        report_path = os.path.join(args.out, "balance_report.csv")
        with open(report_path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        summary_path = os.path.join(args.out, "balance_summary.csv")
        summary = mapgen.corpus_summary(rows)
        with open(summary_path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["metric", "mean", "min", "max"])
            writer.writeheader()
            writer.writerows(summary)
        print(f"wrote {len(rows)} maps + {report_path} + {summary_path}")
    if failures and not rows:
        return 1
    return 0


def load_map_folder(folder: str, reward_mode: str | None = None):
    """Load every `.gamestate` file in a folder (others are skipped)."""
    if not os.path.isdir(folder):
        raise NoMapsFound(f"{folder} is not a directory")
    states = []
    for name in sorted(os.listdir(folder)):
        if ".gamestate" not in name:
            continue
        states.append(load_gamestate(os.path.join(folder, name)))
    if not states:
        raise NoMapsFound(f"no .gamestate files in {folder}")
    if reward_mode:
        for st in states:
            st.config.reward_mode = reward_mode
    return states


def cmd_selfplay(args) -> int:
    states = load_map_folder(args.map_folder, args.reward_mode)
    policy = make_policy(args.policy, args.seed)
    handle, _obs = runtime.build_simulator(
        states, args.distributed_strategy, args.seed,
        record_dir=args.record_dir, compute_digests=False)
    try:
        report = runtime.run_selfplay_batch(handle, policy, args.num_steps)
        if args.record_dir:
            report.episodes.extend(
                {"slot": -1, "replay": p, "truncated": True}
                for p in handle.finalize_recordings())
    finally:
        handle.close()
    doc = report.to_json()
    out = json.dumps(doc, indent=2 if args.pretty else None, sort_keys=True)
    if args.metrics_out:
        with open(args.metrics_out, "w") as f:
            f.write(out + "\n")
    print(out)
    return 0


def cmd_stats(args) -> int:
    if args.replay:
        rep = replay_mod.load_replay_file(args.replay)
        if args.stat not in replay_mod.DEMOGRAPHICS_STATS:
            print(f"unknown statistic {args.stat!r}; registry: "
                  f"{', '.join(replay_mod.DEMOGRAPHICS_STATS)}", file=sys.stderr)
            return 1
        if args.format == "csv":
            sys.stdout.write(replay_mod.demographics_csv(rep, args.stat))
        else:
            series = replay_mod.demographics(rep, args.stat)
            print(json.dumps({"stat": args.stat, "series": series}))
        return 0
    # Directory mode: victory summary across a replay corpus.
    paths = [os.path.join(args.replay_dir, n) for n in sorted(os.listdir(args.replay_dir))
             if n.endswith(".tnrp")]
    if not paths:
        print(f"no .tnrp replays in {args.replay_dir}", file=sys.stderr)
        return 1
    histogram: dict[str, int] = {}
    rows = []
    for p in paths:
        rep = replay_mod.load_replay_file(p)
        kind = rep.final_victory["kind"]
        histogram[kind] = histogram.get(kind, 0) + 1
        rows.append({"replay": os.path.basename(p), "victory": kind,
                     "winner": rep.final_victory["winner"],
                     "turns": rep.recorded_turns,
                     "truncated": rep.truncated})
    if args.format == "csv":
        writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    else:
        print(json.dumps({"histogram": histogram, "games": rows}))
    return 0


def cmd_serve(args) -> int:
    from .service.server import serve_forever
    return serve_forever(args.listen, static_dir=args.static_dir)


def cmd_digest(args) -> int:
    state = load_gamestate(args.path)
    print(state_digest(state))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="terranova",
        description="Six-agent 4X strategy environment: maps, self-play, "
                    "replays, and the session service.")
    sub = parser.add_subparsers(dest="command", required=True)

    gm = sub.add_parser("genmaps", help="generate a balanced map corpus")
    gm.add_argument("--count", type=int, default=10)
    gm.add_argument("--seed", type=int, default=_env_seed())
    gm.add_argument("--out", type=str, required=True)
    gm.add_argument("--width", type=int, default=42)
    gm.add_argument("--height", type=int, default=26)
    gm.add_argument("--json-export", action="store_true",
                    help="also write a lossless JSON export per map")
    gm.set_defaults(func=cmd_genmaps)

    sp = sub.add_parser("selfplay", help="run batched self-play over a map folder")
    sp.add_argument("--seed", type=int, default=_env_seed())
    sp.add_argument("--num_steps", type=int, default=300,
                    help="game turns to play (6 agent steps each)")
    sp.add_argument("--map_folder", type=str, required=True)
    sp.add_argument("--distributed_strategy", type=str, default=_env_strategy(),
                    help="serial | worker-pool(n)")
    sp.add_argument("--policy", type=str, default="random",
                    choices=["random", "greedy"])
    sp.add_argument("--record-dir", type=str, default=None)
    sp.add_argument("--reward-mode", type=str, default=None,
                    choices=["dense", "sparse"])
    sp.add_argument("--metrics-out", type=str, default=None)
    sp.add_argument("--pretty", action="store_true")
    sp.set_defaults(func=cmd_selfplay)

    st = sub.add_parser("stats", help="demographics and victory summaries from replays")
    group = st.add_mutually_exclusive_group(required=True)
    group.add_argument("--replay", type=str)
    group.add_argument("--replay-dir", type=str)
    st.add_argument("--stat", type=str, default="population")
    st.add_argument("--format", type=str, default="csv", choices=["csv", "plotdata"])
    st.set_defaults(func=cmd_stats)

    sv = sub.add_parser("serve", help="run the session service")
    sv.add_argument("--listen", type=str, default="127.0.0.1:8643")
    sv.add_argument("--static-dir", type=str, default=None,
                    help="serve a client bundle over HTTP from this directory")
    sv.set_defaults(func=cmd_serve)

    dg = sub.add_parser("digest", help="print the canonical digest of a .gamestate file")
    dg.add_argument("path", type=str)
    dg.set_defaults(func=cmd_digest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NoMapsFound, FileNotFoundError, replay_mod.ReplayError,
            runtime.BadStrategy, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
