from __future__ import annotations

import logging
import sys
from argparse import ArgumentParser
from collections.abc import Sequence

from diffuseperim import DiffusePerimError, load_config, run

from ._config import KINDS

if sys.version_info < (3, 11):
    from exceptiongroup import ExceptionGroup

logger = logging.getLogger("diffuseperim")


def _diagnostics(exc: BaseException) -> list[str]:
    if isinstance(exc, ExceptionGroup):
        return [line for inner in exc.exceptions for line in _diagnostics(inner)]

    return [f"{type(exc).__name__}: {exc}"]


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="diffuseperim",
        description=(
            "Runs numerical experiments on the Allen–Cahn approximation of the "
            "isoperimetric problem"
        ),
    )
    parser.add_argument("kind", choices=KINDS, help="Experiment to run")
    parser.add_argument(
        "--config", help="INI file with the experiment settings (defaults otherwise)"
    )
    parser.add_argument("--out", help="Directory receiving the artifacts")
    parser.add_argument(
        "--seed", type=int, help="Seed of every random draw of the experiment"
    )
    parser.add_argument("--threads", type=int, help="Number of sweep worker threads")
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Log every solver iteration and quadrature table",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(
            args.config,
            args.kind,
            {"out": args.out, "seed": args.seed, "threads": args.threads},
        )
        return run(config)
    except (DiffusePerimError, ExceptionGroup) as exc:
        for line in _diagnostics(exc):
            print(f"diffuseperim: {line}", file=sys.stderr)

        return 1


if __name__ == "__main__":
    sys.exit(main())
