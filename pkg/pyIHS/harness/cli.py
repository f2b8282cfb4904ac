"""Command-line entry point: ``pyihs <subcommand> [flags]``."""

import argparse
import logging
import typing
from typing import Dict, List, Optional

from ..errors import ConfigError, PyIHSError
from ..logger import CustomLogger
from .Config import EXPERIMENT_KINDS, KIND_ALIASES, SECTIONS, resolve_config
from .runner import run_experiment

logger: logging.Logger = CustomLogger().get_logger()

DESCRIPTIONS = {
    "gen": "Draw a labeled dataset from a source and write dataset.csv and target.json",
    "learn-boost": "Learn by boosting region voters",
    "learn-cover": "Learn by covering with regions",
    "sample-diag": "Sample the consistency body and write walk diagnostics",
    "paper-check": "Run the acceptance criteria",
    "eval": "Score a saved hypothesis on a dataset CSV",
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file with per-module sections")
    common.add_argument("--preset", help="named preset from presets.json")
    common.add_argument("--seed", type=int, help="experiment seed")
    common.add_argument("--out", help="output directory (default: $PYIHS_OUTPUT_ROOT/<subcommand>)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; may be repeated")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
    fields = common.add_argument_group("config fields")
    for section, cls in SECTIONS.items():
        for key in typing.get_type_hints(cls):
            fields.add_argument(f"--{section}.{key}", dest=f"{section}.{key}", metavar="VALUE",
                                default=argparse.SUPPRESS)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pyihs", description="Learning intersections of halfspaces with a margin")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    for kind in EXPERIMENT_KINDS:
        aliases = [alias for alias, target in KIND_ALIASES.items() if target == kind]
        p = sub.add_parser(kind, aliases=aliases, parents=[common], help=DESCRIPTIONS[kind],
                           description=DESCRIPTIONS[kind])
        if kind == "paper-check":
            p.add_argument("--criteria", help="comma-separated criterion ids, e.g. 1,3,12")
        if kind == "eval":
            p.add_argument("--hypothesis", help="hypothesis.json written by a learn run")
            p.add_argument("--dataset", help="dataset CSV with x0..x{n-1} and label columns")
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    """Dotted overrides from --section.key flags and --set entries; --set wins."""
    overrides = {name: value for name, value in vars(args).items() if "." in name}
    for entry in args.set:
        if "=" not in entry:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got '{entry}'")
        name, value = entry.split("=", 1)
        overrides[name.strip()] = value.strip()
    if getattr(args, "criteria", None) is not None:
        overrides["experiment.criteria"] = args.criteria
    if getattr(args, "hypothesis", None) is not None:
        overrides["output.hypothesis"] = args.hypothesis
    if getattr(args, "dataset", None) is not None:
        overrides["output.dataset"] = args.dataset
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        CustomLogger().set_level(logging.DEBUG)
    elif args.quiet:
        CustomLogger().set_level(logging.WARNING)
    try:
        kind = KIND_ALIASES.get(args.command, args.command)
        cfg = resolve_config(kind=kind, preset=args.preset, config_file=args.config,
                             overrides=collect_overrides(args), seed=args.seed, out_dir=args.out)
        metrics, artifacts = run_experiment(cfg)
    except PyIHSError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    logger.info("Wrote %s", ", ".join(sorted(artifacts)))
    if metrics.tag is not None:
        logger.info("Termination tag: %s", metrics.tag)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
