#!/usr/bin/env python3
"""CLI shim for the natlas experiment commands."""
from __future__ import annotations

import sys

from natlas.cli import main as cli_main
from natlas.logging import configure_logging, logging_context, set_global_context
from natlas.versioning import get_toolkit_version

SCRIPT_NAME = "natlas_cli"


def main() -> None:
    configure_logging()
    set_global_context(app="natlas", entry=SCRIPT_NAME)
    with logging_context(script=SCRIPT_NAME, toolkit_version=get_toolkit_version()):
        sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
