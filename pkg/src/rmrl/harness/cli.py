"""Command line: ``rmrl train | calibrate | eval | analyze``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from ..env import Mode
from ..learner import NonFiniteLoss
from . import config as config_io
from .metrics import MetricsError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rmrl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train one configuration")
    t.add_argument("--config", required=True, type=Path)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", type=Path)

    c = sub.add_parser("calibrate", help="recommend an NI threshold from random and idle probes")
    c.add_argument("--config", required=True, type=Path)
    c.add_argument("--probe-steps", required=True, type=int)
    c.add_argument("--seed", type=int)

    e = sub.add_parser("eval", help="evaluate a checkpoint on freshly reset tasks")
    e.add_argument("--checkpoint", required=True, type=Path)
    e.add_argument("--mode", choices=[m.value for m in Mode], default="train")
    e.add_argument("--tasks", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("analyze", help="tables of success vs steps / resets and point clouds")
    a.add_argument("dirs", nargs="+", type=Path)
    a.add_argument("--out", type=Path)
    a.add_argument("--smoothing", type=int, default=1)
    return p


def _load_config(path: Path, seed=None):
    cfg = config_io.load(path)
    if seed is not None:
        cfg.run = dataclasses.replace(cfg.run, seed=seed)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            from .train import train

            cfg = _load_config(args.config, args.seed)
            out = args.out or Path("runs") / f"{cfg.strategy.kind.value}_seed{cfg.run.seed}"
            result = train(cfg, out)
            print(json.dumps({"run_dir": str(result.run_dir), "steps": result.steps, "resets": len(result.resets),
                              "final_eval": result.evals[-2:]}))
        elif args.command == "calibrate":
            from .calibrate import calibrate_threshold

            cfg = _load_config(args.config)
            print(json.dumps(calibrate_threshold(cfg, args.probe_steps, args.seed).summary(), indent=2))
        elif args.command == "eval":
            from .evaluate import evaluate

            if args.tasks < 1:
                print("rmrl eval: --tasks must be at least 1", file=sys.stderr)
                return 1
            res = evaluate(args.checkpoint, Mode(args.mode), args.tasks, args.seed)
            print(json.dumps({"mode": res.mode.value, "tasks": res.n_tasks, "success_rate": res.success_rate,
                              "mean_steps": res.mean_steps}))
        elif args.command == "analyze":
            from .analyze import analyze, first_crossing

            result = analyze(args.dirs, args.out, args.smoothing)
            for name, summary in result["runs"].items():
                cross = {lvl: first_crossing(summary, lvl, smoothing=args.smoothing) for lvl in (0.5, 0.8)}
                print(json.dumps({"run": name, "resets": summary.total_resets, "first_crossing": cross}))
            for d, msg in result["errors"].items():
                print(f"rmrl analyze: {msg}", file=sys.stderr)
            if not result["runs"]:
                return 2
    except config_io.ConfigError as exc:
        print(f"rmrl: invalid config: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"rmrl: {exc}", file=sys.stderr)
        return 1
    except (NonFiniteLoss, MetricsError, ValueError, OSError) as exc:
        print(f"rmrl: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
