"""Command line entry point: ``groupsense <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import pipeline
from .config import dump_config, load_config
from .errors import GroupSenseError

STAGES = {
    "simulate": pipeline.stage_simulate,
    "features": pipeline.stage_features,
    "tune": pipeline.stage_tune,
    "train": pipeline.stage_train,
    "predict": pipeline.stage_predict,
    "groups": pipeline.stage_groups,
    "evaluate": pipeline.stage_evaluate,
    "report": pipeline.stage_report,
    "pipeline": pipeline.stage_pipeline,
}

_HELP = {
    "simulate": "generate a synthetic session into the data directory",
    "features": "ingest the session and write features.csv and np_baseline.csv",
    "tune": "select the model configuration and thresholds on the tuning pairs",
    "train": "fit the final model on the evaluation pairs",
    "predict": "write per-row probabilities (out-of-fold on evaluation pairs)",
    "groups": "detect per-second communities from the probabilities",
    "evaluate": "compute link-, node- and group-level metrics",
    "report": "render SVG figures and print a summary",
    "pipeline": "run every stage from simulate to report",
    "config": "print the effective configuration",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--data-dir", help="session log directory")
    common.add_argument("--out-dir", help="directory for stage outputs")
    common.add_argument("--seed", type=int, help="random seed for every stochastic step")
    common.add_argument("--jobs", type=int, help="worker processes (results do not depend on it)")
    common.add_argument("--format", choices=("text", "json"), default="text", help="stdout format")

    parser = argparse.ArgumentParser(prog="groupsense", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(STAGES) + ["config"]:
        p = sub.add_parser(name, parents=[common], help=_HELP[name])
        if name == "groups":
            p.add_argument("--resolution", type=float, help="community resolution (overrides config)")
    return parser


def _effective_config(args):
    cfg = load_config(args.config)
    kw = {}
    if args.data_dir is not None:
        kw["data_dir"] = args.data_dir
    if args.out_dir is not None:
        kw["out_dir"] = args.out_dir
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.jobs is not None:
        kw["jobs"] = args.jobs
    if getattr(args, "resolution", None) is not None:
        kw["resolution"] = args.resolution
    return replace(cfg, **kw).validate()


def _print(result, fmt):
    if fmt == "json":
        print(json.dumps(result, sort_keys=True, default=str))
        return
    for key, value in result.items():
        if isinstance(value, dict):
            print(f"{key}:")
            for k, v in value.items():
                print(f"  {k}: {v}")
        else:
            print(f"{key}: {value}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        if args.command == "config":
            print(dump_config(cfg), end="")
            return 0
        if args.command == "groups":
            result = pipeline.stage_groups(cfg, cfg.resolution)
        else:
            result = STAGES[args.command](cfg)
    except GroupSenseError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return 2
    _print(result, args.format)
    return 0


if __name__ == "__main__":
    sys.exit(main())
