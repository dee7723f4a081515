import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

from wblab.__src.lab.config import SCHEMAS, parse_config
from wblab.__src.lab.runner import run
from wblab.__src.utils.errors import ConfigError, LabError
from wblab.__src.utils.persistence import dumps_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Convenience flags per module: flag -> section key.
SHORTCUTS = {
    "scalar": {"--flux": "flux", "--n-cells": "n_cells", "--t-end": "t_end", "--u0": "u0"},
    "device": {"--bias": "bias", "--biases": "biases", "--n-cells": "n_cells", "--debye": "debye",
               "--tau": "damping_tau"},
    "vfp": {"--u": "u", "--kappa": "kappa", "--n-modes": "n_modes", "--t-end": "t_end",
            "--kinetic": "kinetic"},
    "waterwave": {"--amplitude": "amplitude", "--n-points": "n_points", "--t-end": "t_end", "--dt": "dt"},
    "serre": {"--alpha": "alpha", "--kd": "kd", "--model": "model", "--amplitude": "amplitude",
              "--amplitudes": "amplitudes"},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wblab", description="Well-balanced and spectral solvers for balance laws and water waves.")
    modules = parser.add_subparsers(dest="module", required=True, parser_class=_Parser)
    for module, schema in SCHEMAS.items():
        actions = next(option.choices for option in schema if option.name == "action")
        sub = modules.add_parser(module, help=f"{module} scenarios")
        sub.add_argument("action", choices=actions)
        sub.add_argument("--config", help="scenario file (key = value lines)")
        sub.add_argument("--out", help="output directory (overrides the 'output' key)")
        sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                         help="override one configuration key; repeatable")
        sub.add_argument("--log-level", default="WARNING",
                         choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"))
        for flag, key in SHORTCUTS[module].items():
            sub.add_argument(flag, dest=f"shortcut_{key}", metavar=key.upper(), help=f"sets {module}.{key}")
    return parser


def _overrides(args: argparse.Namespace) -> List[str]:
    items = [f"{args.module}.action={args.action}"]
    for key in SHORTCUTS[args.module].values():
        value = getattr(args, f"shortcut_{key}")
        if value is not None:
            items.append(f"{args.module}.{key}={value}")
    return items + list(args.overrides)


def _report_error(err: LabError, out_dir: Optional[str]):
    payload = {"error": type(err).__name__, "message": str(err), "details": err.details()}
    text = dumps_json(payload)
    sys.stderr.write(text)
    if out_dir is not None and os.path.isdir(out_dir):
        with open(os.path.join(out_dir, "error.json"), "w", encoding="utf-8") as f:
            f.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Command line entry point: `wblab <module> <action> [--config FILE] [--out DIR]
    [--set KEY=VALUE ...] [--log-level LEVEL]`.

    Returns 0 on success, 1 on a numerical failure (with `error.json` in the output
    directory) and 2 on configuration or argument errors, in which case nothing is written.

    Example usage:
    ```
        $ wblab serre sweep --amplitudes 0.1,0.45,0.7 --out table
        $ wblab serre dispersion --alpha 1.2 --kd 0:5:0.01
    ```
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)

    try:
        text = ""
        if args.config is not None:
            try:
                with open(args.config, encoding="utf-8") as f:
                    text = f.read()
            except OSError as err:
                raise ConfigError([("--config", str(err))])
        config = parse_config(text, _overrides(args), module=args.module)
    except ConfigError as err:
        sys.stderr.write(dumps_json({"error": type(err).__name__, "message": str(err), "details": err.details()}))
        return EXIT_CONFIG

    out_dir = args.out or config.output
    try:
        result = run(config, out_dir)
    except LabError as err:
        logger.error("%s failed: %s", config.module, err)
        _report_error(err, out_dir)
        return EXIT_NUMERICAL
    print(json.dumps({"out": result.out_dir, "files": result.files}, indent=2))
    return EXIT_OK
