"""
Main entry point for elastoscope.
Dispatches to the forward / reconstruct / certify / stability subcommands.
"""

import sys

from elastoscope.api.cli import run
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


def main() -> None:
    try:
        code = run(sys.argv[1:])
    except KeyboardInterrupt:
        logger.info("[*] Interrupted")
        code = 130
    sys.exit(code)


if __name__ == "__main__":
    main()
