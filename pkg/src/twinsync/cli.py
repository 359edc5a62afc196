"""``twinsync`` command line: train, eval, sweep and baseline runs.

Every CSV starts with a ``# config_hash=...,seed=...,version=...`` comment
line followed by a fixed header. Floats carry 9 significant digits.
Failures print one JSON object on stderr and exit with

* 2 -- invalid configuration or arguments,
* 3 -- file-system failure (unreadable config, missing checkpoint, ...),
* 4 -- checkpoint trained under a different configuration.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import __version__
from .agent import ACTIONS, Action, PrimalDualQAgent
from .config import RunConfig
from .exceptions import CheckpointMismatch, ConfigError, DomainError, LoadError
from .sim import FixedPolicy, evaluate, sweep_fixed_policies, train

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MISMATCH = 4

LEARNING_CURVE_HEADER = ("episode", "avg_load", "avg_mse", "lambda", "epsilon")
TRADEOFF_HEADER = ("rate", "horizon", "p_loss", "avg_mse", "avg_load")
FRONTIER_HEADER = ("e_budget", "p_loss", "min_load", "argmin_action")
EVAL_HEADER = ("episode", "seed", "avg_load", "avg_mse", "feasible")
BASELINE_HEADER = ("rate", "horizon", "p_loss", "avg_mse", "avg_load", "feasible")

CORNER_ACTIONS = (Action(10, 0), Action(10, 100), Action(1000, 0), Action(1000, 100))


class CliError(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code = code
        self.kind = kind


def fmt(value):
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else f"{value:.9g}"
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows, cfg):
    """Write ``rows`` under a provenance comment; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash={cfg.config_hash},seed={cfg.seed},version={__version__}\n")
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])
    return path


def load_config(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    if args.out is not None:
        overrides.append(f"output_dir={json.dumps(str(args.out))}")
    if args.config is not None and not Path(args.config).is_file():
        raise CliError(EXIT_IO, "io", f"cannot read config file {args.config}")
    return RunConfig.from_file(args.config, overrides)


def out_dir(cfg):
    return Path(cfg["output_dir"])


# -- commands -------------------------------------------------------------------


def cmd_train(args):
    cfg = load_config(args)
    agent, curve = train(cfg)
    rows = [tuple(r[k] for k in LEARNING_CURVE_HEADER) for r in curve]
    path = write_csv(out_dir(cfg) / "learning_curve.csv", LEARNING_CURVE_HEADER, rows, cfg)
    ckpt = out_dir(cfg) / "policy.json"
    agent.save(ckpt, cfg.config_hash)
    print(f"trained {len(curve)} episodes; selected episode {agent.selected_episode_}; "
          f"lambda={fmt(agent.dual_.lam)}")
    print(f"wrote {ckpt} and {path}")
    return 0


def cmd_eval(args):
    cfg = load_config(args)
    if args.episodes is not None and args.episodes < 1:
        raise CliError(EXIT_CONFIG, "config", "evaluation needs at least one episode (-n >= 1)")
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise CliError(EXIT_IO, "io", f"checkpoint not found: {ckpt}")
    try:
        agent = PrimalDualQAgent.load(ckpt, expected_hash=cfg.config_hash)
    except (json.JSONDecodeError, KeyError) as exc:
        raise CliError(EXIT_IO, "io", f"unreadable checkpoint {ckpt}: {exc}") from None
    summary = evaluate(agent, cfg, n_episodes=args.episodes)
    e_max = summary.e_max
    rows = [(i, seed, load, mse, agent.error_of(mse) <= e_max)
            for i, (seed, load, mse) in enumerate(summary.episodes)]
    rows.append(("mean", "", summary.mean_load, summary.mean_mse, summary.feasible))
    path = write_csv(out_dir(cfg) / "eval.csv", EVAL_HEADER, rows, cfg)
    print(f"summary n={summary.n_episodes} avg_load={fmt(summary.mean_load)} "
          f"avg_mse={fmt(summary.mean_mse)} e_max={fmt(e_max)} feasible={fmt(summary.feasible)}")
    print(f"wrote {path}")
    return 0


def cmd_sweep(args):
    cfg = load_config(args)
    table = sweep_fixed_policies(cfg)
    trade = write_csv(
        out_dir(cfg) / "tradeoff.csv", TRADEOFF_HEADER,
        [(r.rate_hz, r.horizon_ms, r.p_loss, r.avg_mse, r.avg_load) for r in table.rows], cfg,
    )
    frontier = sorted(table.frontier, key=lambda f: (f.e_budget, f.p_loss))
    front = write_csv(
        out_dir(cfg) / "frontier.csv", FRONTIER_HEADER,
        [(f.e_budget, f.p_loss, f.min_load, f.argmin_action) for f in frontier], cfg,
    )
    print(f"{len(table.rows)} fixed policies swept; wrote {trade} and {front}")
    return 0


def cmd_baseline(args):
    cfg = load_config(args)
    p_loss = float(cfg["channel"]["p_loss"])
    rows = []
    for action in CORNER_ACTIONS:
        s = evaluate(FixedPolicy(ACTIONS.index(action)), cfg)
        rows.append((action.rate_hz, action.horizon_ms, p_loss, s.mean_mse, s.mean_load, s.feasible))
        print(f"{action}: avg_load={fmt(s.mean_load)} avg_mse={fmt(s.mean_mse)} feasible={fmt(s.feasible)}")
    path = write_csv(out_dir(cfg) / "baseline.csv", BASELINE_HEADER, rows, cfg)
    print(f"wrote {path}")
    return 0


# -- argument parsing -------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file (defaults apply to missing keys)")
    common.add_argument("--seed", type=int, help="run seed")
    common.add_argument("--jobs", type=int, help="worker processes for episode fan-out")
    common.add_argument("--out", help="output directory")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config leaf by dotted path; repeatable")

    parser = argparse.ArgumentParser(prog="twinsync", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"twinsync {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train a policy; writes checkpoint + learning curve")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on held-out seeds")
    ev.add_argument("--checkpoint", required=True, help="policy.json written by train")
    ev.add_argument("-n", "--episodes", type=int, help="number of episodes (default: eval.n_episodes)")
    sub.add_parser("sweep", parents=[common], help="all fixed policies; writes trade-off + frontier")
    sub.add_parser("baseline", parents=[common], help="the four corner fixed policies")
    return parser


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep, "baseline": cmd_baseline}


def _fail(code, kind, message):
    print(json.dumps({"error": kind, "exit_code": code, "message": str(message)}), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage; keep its 0 for --help/--version
        return EXIT_CONFIG if exc.code else 0
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        return _fail(exc.code, exc.kind, exc)
    except CheckpointMismatch as exc:
        return _fail(EXIT_MISMATCH, "checkpoint_mismatch", exc)
    except (ConfigError, DomainError, LoadError) as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except (TypeError, ValueError) as exc:
        # ill-typed override values surface here
        return _fail(EXIT_CONFIG, "config", exc)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)


if __name__ == "__main__":
    sys.exit(main())
