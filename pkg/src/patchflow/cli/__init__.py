"""Command-line entry point.

Exit codes: 0 ok, 2 config, 3 data, 4 numeric, 5 contract.
"""

import argparse
import sys

from ..errors import PatchflowError, exit_code_for
from .config import load_run_config
from .log import get_logger, log_record

logger = get_logger("patchflow.cli")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (merged over defaults)")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="dotted config override, e.g. sampling.temperature=0.7")

    parser = argparse.ArgumentParser(
        prog="patchflow",
        description="Patch-local tokenized generation: training, 3-D scene "
                    "edits via flow fields, and self-supervised depth.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", parents=[common],
                   help="render synthetic scenes to a cache directory")

    p = sub.add_parser("train-tokenizer", parents=[common], help="train a patch tokenizer")
    p.add_argument("which", choices=["rgb", "flow"])

    p = sub.add_parser("train-model", parents=[common], help="train a sequence model")
    p.add_argument("which", choices=["rgb", "flow"])

    p = sub.add_parser("nvs", parents=[common], help="novel view synthesis on a synthetic scene")
    p.add_argument("--camera", help='shorthand like "yaw=10deg,tx=0.1"')

    sub.add_parser("edit", parents=[common], help="rigid object edit via masked flow")
    sub.add_parser("remove", parents=[common], help="object removal via high-magnitude flow")
    sub.add_parser("depth", parents=[common], help="depth extraction from sampled flow")

    p = sub.add_parser("eval", parents=[common], help="run a quantitative benchmark")
    p.add_argument("task", choices=["nvs", "edit", "depth"])

    p = sub.add_parser("inspect", parents=[common], help="verify and summarize a binary artifact")
    p.add_argument("path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        from . import commands

        if args.command == "inspect":
            return commands.cmd_inspect(args.path)
        config = load_run_config(args.config, args.overrides)
        if args.command == "gen-data":
            return commands.cmd_gen_data(config)
        if args.command == "train-tokenizer":
            return commands.cmd_train_tokenizer(config, args.which)
        if args.command == "train-model":
            return commands.cmd_train_model(config, args.which)
        if args.command == "nvs":
            return commands.cmd_nvs(config, args.camera)
        if args.command == "edit":
            return commands.cmd_edit(config)
        if args.command == "remove":
            return commands.cmd_remove(config)
        if args.command == "depth":
            return commands.cmd_depth(config)
        if args.command == "eval":
            return commands.cmd_eval(config, args.task)
        raise PatchflowError(f"unhandled command {args.command}")
    except PatchflowError as exc:
        log_record(logger, str(exc), error_category=exc.category,
                   error_type=type(exc).__name__)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
