"""Command-line entry point ``cfemf``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .commands import cmd_bench, cmd_dataset, cmd_simulate, cmd_train
from .config import ConfigError, load_config

COMMANDS = {"simulate": cmd_simulate, "dataset": cmd_dataset, "train": cmd_train,
            "bench": cmd_bench}


def _u64(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cfemf",
        description="Power control under exposure limits for cell-free massive MIMO.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("simulate", "run policies over Monte Carlo trials, write CDF CSVs and a summary"),
            ("dataset", "solve scenarios and store FPC features with optimal powers"),
            ("train", "train a network on a dataset file"),
            ("bench", "time every policy on the same scenarios")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="INI file overriding default.cfg")
        p.add_argument("--seed", type=_u64, help="master seed")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--preset", choices=("small", "paper"), help="system size preset")
        p.add_argument("--policy", metavar="NAME[,NAME...]", help="policies to run")
        p.add_argument("--direction", choices=("dl", "ul"))
        p.add_argument("--beamformer", choices=("cb", "rzf"))
        p.add_argument("--trials", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--evaluation", choices=("estimated", "true"))
        p.add_argument("--model", metavar="PATH",
                       help="trained model JSON (e2e or unfolded, detected from the file)")
        if name == "dataset":
            p.add_argument("--samples", type=int)
            p.add_argument("--unfold", action="store_true", help="also store LSE iterate traces")
        if name == "train":
            p.add_argument("--dataset", metavar="PATH")
            p.add_argument("--kind", choices=("e2e", "unfolded"), help="network to train")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _model_overrides(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            kind = json.load(fh).get("kind")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read model {path}: {exc}") from None
    return {"unfolded_model": path} if kind == "unfolded" else {"e2e_model": path}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {
            "seed": args.seed, "out": args.out, "direction": args.direction,
            "beamformer": args.beamformer, "trials": args.trials, "workers": args.workers,
            "evaluation": args.evaluation,
            "policies": tuple(p.strip() for p in args.policy.split(",") if p.strip())
            if args.policy else None,
            "samples": getattr(args, "samples", None),
            "unfold": True if getattr(args, "unfold", False) else None,
            "dataset": getattr(args, "dataset", None),
        }
        overrides.update(_model_overrides(args.model))
        cfg = load_config(args.config, preset=args.preset, overrides=overrides)
        if getattr(args, "kind", None):
            cfg.model = args.kind
            cfg.validate()
        result = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"cfemf: configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and exit 1
        logging.getLogger("cfemf").debug("failure", exc_info=True)
        print(f"cfemf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(_brief(result), indent=2, sort_keys=True))
    return 0


def _brief(result):
    """Console summary: drop bulky fields."""
    if not isinstance(result, dict):
        return result
    out = dict(result)
    for stats in out.get("policies", {}).values():
        stats.pop("failure_messages", None)
    return out


if __name__ == "__main__":
    sys.exit(main())
