"""`odsc` command line: validate, compile, write, read, check, expand and serve."""

import argparse
import sys
from typing import Optional, Sequence

from .operators import get_operators
from .operators.common import EXIT_ERROR
from .preferences import EXIT_POLICIES, OUTPUT_FORMATS, get_preferences
from .utils.logging import get_logger, refresh_level
from .utils.version import package_version

logger = get_logger(__name__)


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset after it
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--store", dest="store_dir", default=argparse.SUPPRESS,
                        help="Store directory (env ODS_STORE_DIR)")
    parent.add_argument("--format", dest="output_format", choices=OUTPUT_FORMATS, default=argparse.SUPPRESS,
                        help="Output format (env ODS_OUTPUT_FORMAT)")
    parent.add_argument("--exit-policy", choices=EXIT_POLICIES, default=argparse.SUPPRESS,
                        help="How check decisions map to exit status (env ODS_EXIT_POLICY)")
    parent.add_argument("--verbose", "-v", dest="developer_mode", action="store_true", default=argparse.SUPPRESS,
                        help="Debug logging (env ODS_DEVELOPER_MODE)")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parent = _global_flags()
    parser = argparse.ArgumentParser(
        prog="odsc",
        description="Compile ODRL policies using the ODS profile into relationship-based access control",
        parents=[parent],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {package_version()}")
    subcommands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for operator in get_operators():
        sub = subcommands.add_parser(
            operator.bl_idname,
            help=operator.bl_label,
            description=operator.bl_description or operator.bl_label,
            parents=[parent],
        )
        operator.add_arguments(sub)
        sub.set_defaults(operator=operator)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        prefs = get_preferences({
            "store_dir": getattr(args, "store_dir", None),
            "output_format": getattr(args, "output_format", None),
            "exit_policy": getattr(args, "exit_policy", None),
            "developer_mode": getattr(args, "developer_mode", None),
        })
    except ValueError as e:
        logger.error(str(e))
        return EXIT_ERROR
    refresh_level()
    logger.debug(f"Running '{args.command}' with {prefs}")
    return args.operator(prefs).invoke(args)


if __name__ == "__main__":
    sys.exit(main())
