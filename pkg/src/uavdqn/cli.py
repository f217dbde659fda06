"""Command-line entry point: ``uavdqn {train,evaluate,compare,plot,inspect-channel}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import channel
from .config import ConfigurationError, load_config
from .dqn import load_checkpoint, save_checkpoint
from .errors import TrainingError
from .harness import evaluate, prepare_scenario, run_metadata, train
from .plotting import (CsvParseError, run_plot, snapshot_svg, timeseries_svg,
                       training_curve_svg, write_text)
from .policies import POLICY_ORDER, PolicyKind
from .world import snapshot_csv

logger = logging.getLogger("uavdqn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, out_required=True):
    p.add_argument("--config", metavar="PATH", help="flat JSON config overriding the preset")
    p.add_argument("--scale", choices=("desk", "paper"), default="desk", help="base preset")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--out", metavar="DIR", required=out_required, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uavdqn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one DQN agent per UAV")
    _common(p)
    p.add_argument("--episodes", type=int, help="override run.episodes")
    p.add_argument("--no-step-record", action="store_true", help="skip the per-step record CSV")

    p = sub.add_parser("evaluate", help="run one frozen episode of a policy")
    _common(p)
    p.add_argument("--policy", required=True, choices=[k.value for k in PolicyKind])
    p.add_argument("--checkpoint", metavar="DIR", help="directory of agent_<j>.qnet files (dqn only)")

    p = sub.add_parser("compare", help="evaluate all four policies on shared seeds")
    _common(p)
    p.add_argument("--seeds", help="comma-separated seeds (default: the single --seed/config seed)")
    p.add_argument("--checkpoint", metavar="DIR", help="directory holding seed_<s>/agent_<j>.qnet")
    p.add_argument("--train", action="store_true", help="train the DQN for each seed first")
    p.add_argument("--episodes", type=int, help="override run.episodes when training")

    p = sub.add_parser("plot", help="render SVG figures from record CSV files")
    p.add_argument("records", nargs="+", metavar="CSV")
    p.add_argument("--out", metavar="DIR", required=True)
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("inspect-channel", help="tabulate path loss and rate over a radius sweep")
    _common(p)
    p.add_argument("--r-min", type=float, default=0.0)
    p.add_argument("--r-max", type=float, default=1000.0)
    p.add_argument("--r-step", type=float, default=50.0)
    p.add_argument("--height", type=float, help="UAV altitude in meters (default run.altitude_h)")
    return parser


def _config(args):
    cfg = load_config(args.config, args.scale)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "episodes", None) is not None:
        overrides["episodes"] = args.episodes
    return cfg.replace(**overrides) if overrides else cfg


def _write_json(path, obj):
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _checkpoint_paths(directory, n_uavs):
    return [os.path.join(directory, f"agent_{j}.qnet") for j in range(n_uavs)]


def _load_nets(directory, n_uavs):
    nets = []
    for path in _checkpoint_paths(directory, n_uavs):
        if not os.path.isfile(path):
            raise FileNotFoundError(f"missing dqn checkpoint: {path}")
        nets.append(load_checkpoint(path))
    return nets


def _save_nets(nets, directory):
    os.makedirs(directory, exist_ok=True)
    for net, path in zip(nets, _checkpoint_paths(directory, len(nets))):
        save_checkpoint(net, path)


def cmd_train(args):
    cfg = _config(args)
    os.makedirs(args.out, exist_ok=True)
    scenario = prepare_scenario(cfg)

    def progress(e, mean_rate):
        if (e + 1) % max(1, cfg.episodes // 20) == 0:
            logger.info("episode %d/%d mean sum rate %.4g bps", e + 1, cfg.episodes, mean_rate)

    ckpt = os.path.join(args.out, "checkpoints", f"seed_{cfg.seed}")
    try:
        nets, record = train(cfg, scenario, progress=progress)
    except TrainingError as exc:
        if exc.networks:
            aborted = os.path.join(ckpt, "aborted")
            _save_nets(exc.networks, aborted)
            exc.args = (f"{exc}; networks at failure saved to {aborted}",)
        raise
    _save_nets(nets, ckpt)
    write_text(os.path.join(args.out, "episodes.csv"), record.episodes_csv())
    if not args.no_step_record:
        write_text(os.path.join(args.out, "record.csv"), record.to_csv())
    write_text(os.path.join(args.out, "training.svg"),
               training_curve_svg(record.episode_mean_sum_rate()))
    write_text(os.path.join(args.out, "snapshot_t0.csv"),
               snapshot_csv(scenario.state(-1, scenario.initial_uavs)))
    meta = dict(record.metadata)
    _write_json(os.path.join(args.out, "metadata.json"), meta)
    return 0


def cmd_evaluate(args):
    cfg = _config(args)
    kind = PolicyKind(args.policy)
    nets = None
    if kind is PolicyKind.DQN:
        if not args.checkpoint:
            raise UsageError("--checkpoint DIR is required for --policy dqn")
        nets = _load_nets(args.checkpoint, cfg.n_uavs)
    os.makedirs(args.out, exist_ok=True)
    record = evaluate(cfg, kind, nets)
    write_text(os.path.join(args.out, f"record_{kind.value}.csv"), record.to_csv())
    write_text(os.path.join(args.out, f"timing_{kind.value}.csv"),
               f"policy,mean_decision_ms\n{kind.value},{record.mean_decision_ms():.6g}\n")
    _write_json(os.path.join(args.out, "metadata.json"), record.metadata)
    return 0


def compare(cfg, seeds, out_dir, checkpoint=None, train_first=False):
    """Evaluate every policy per seed; returns ``{policy: [mean sum rate per seed]}``."""
    if not train_first and checkpoint is None:
        raise UsageError("compare needs --checkpoint DIR or --train for the dqn policy")
    os.makedirs(out_dir, exist_ok=True)
    rows = ["seed,policy,t,sum_rate_bps"]
    means = {k.value: [] for k in POLICY_ORDER}
    timing = {k.value: [] for k in POLICY_ORDER}
    curves = {k.value: [] for k in POLICY_ORDER}
    for seed in seeds:
        scfg = cfg.replace(seed=seed)
        scenario = prepare_scenario(scfg)
        seed_dir = os.path.join(out_dir, f"seed_{seed}")
        os.makedirs(seed_dir, exist_ok=True)
        if train_first:
            nets, _ = train(scfg, scenario)
            _save_nets(nets, os.path.join(out_dir, "checkpoints", f"seed_{seed}"))
        else:
            nets = _load_nets(os.path.join(checkpoint, f"seed_{seed}"), scfg.n_uavs)
        for kind in POLICY_ORDER:
            record = evaluate(scfg, kind, nets if kind is PolicyKind.DQN else None, scenario)
            write_text(os.path.join(seed_dir, f"record_{kind.value}.csv"), record.to_csv())
            rates = record.sum_rate[0]
            rows.extend(f"{seed},{kind.value},{t},{v:.9g}" for t, v in enumerate(rates))
            means[kind.value].append(float(rates.mean()))
            timing[kind.value].append(record.mean_decision_ms())
            curves[kind.value].append(rates)
    write_text(os.path.join(out_dir, "compare_sum_rate.csv"), "\n".join(rows) + "\n")
    best = np.mean(means[PolicyKind.EXHAUSTIVE.value])
    summary = ["policy,mean_sum_rate_bps,ratio_to_exhaustive"]
    for name, vals in means.items():
        summary.append(f"{name},{np.mean(vals):.9g},{np.mean(vals) / best:.6f}")
    write_text(os.path.join(out_dir, "summary.csv"), "\n".join(summary) + "\n")
    timing_rows = ["policy,mean_decision_ms"]
    timing_rows += [f"{name},{np.mean(v):.6g}" for name, v in timing.items()]
    write_text(os.path.join(out_dir, "timing.csv"), "\n".join(timing_rows) + "\n")
    write_text(os.path.join(out_dir, "sum_rate.svg"),
               timeseries_svg({k: np.mean(v, axis=0) for k, v in curves.items()}))
    _write_json(os.path.join(out_dir, "metadata.json"),
                run_metadata(cfg, mode="compare", seeds=list(seeds)))
    return means, timing


def cmd_compare(args):
    cfg = _config(args)
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise UsageError(f"--seeds must be comma-separated integers, got {args.seeds!r}")
    else:
        seeds = [cfg.seed]
    compare(cfg, seeds, args.out, args.checkpoint, args.train)
    with open(os.path.join(args.out, "summary.csv"), encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    return 0


def cmd_plot(args):
    run_plot(args.records, args.out)
    return 0


def channel_sweep(env, height, r_min, r_max, r_step):
    if r_min < 0 or r_max < r_min or r_step <= 0:
        raise UsageError(f"invalid sweep range r={r_min}..{r_max} step {r_step}")
    n = int(np.floor((r_max - r_min) / r_step + 1e-9)) + 1
    radii = r_min + r_step * np.arange(n)
    lines = ["r_m,elevation_deg,p_los,pl_db,snr_db,rate_bps"]
    for r in radii:
        pl = channel.a2g_mean_pl_db(r, height, env)
        snr_db = env.uav_tx_dbm - pl - env.noise_dbm
        rate = channel.rate_bps(channel.db_to_linear(snr_db), env.bandwidth_hz)
        lines.append(",".join(f"{v:.9g}" for v in (
            r, channel.elevation_deg(r, height), channel.los_probability(r, height, env),
            pl, snr_db, rate)))
    return "\n".join(lines) + "\n"


def cmd_inspect_channel(args):
    cfg = _config(args)
    height = cfg.altitude_h if args.height is None else args.height
    text = channel_sweep(cfg.env, height, args.r_min, args.r_max, args.r_step)
    os.makedirs(args.out, exist_ok=True)
    write_text(os.path.join(args.out, "channel_sweep.csv"), text)
    return 0


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "plot": cmd_plot,
    "inspect-channel": cmd_inspect_channel,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"uavdqn: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"uavdqn: error: {exc}", file=sys.stderr)
        return 2
    except (ConfigurationError, CsvParseError, FileNotFoundError, TrainingError,
            channel.ChannelDomainError, ValueError) as exc:
        print(f"uavdqn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
