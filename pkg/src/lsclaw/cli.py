"""Command line entry point: ``lsclaw run|convergence|compare|checks``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, GridError, InvariantError, ValidityError
from .experiment import Experiment, run_experiment
from .tolerances import tol_scale

log = logging.getLogger("lsclaw")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsclaw", description="Level-set transport-collapse experiments")
    parser.add_argument("kind", choices=("run", "convergence", "compare", "checks"))
    parser.add_argument("--config", required=True, help="JSON experiment configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        tol_scale()
        exp = Experiment.from_file(args.config, kind=args.kind, out=args.out)
        ok = run_experiment(exp, threads=max(1, args.threads))
    except (ConfigError, GridError, InvariantError, ValidityError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2
    if not ok:
        log.error("invariant checks failed; see checks.csv")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
