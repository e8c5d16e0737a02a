"""Entrypoint for CLI and interactive REPL modes."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Callable
from pathlib import Path

from dotenv import load_dotenv

from blowuplab.paths import REPO_ROOT, ensure_runtime_layout, load_user_settings

_ENV_LOG_LEVEL = "BLOWUPLAB_LOG_LEVEL"
_USAGE = "Usage: blowuplab {run|sweep|plot|validate|list-configs} --help"

Command = Callable[[argparse.Namespace], int]


def _load_env_files() -> None:
    """Load .env from the working directory, then the checkout root."""
    for env_path in (Path.cwd() / ".env", REPO_ROOT / ".env"):
        if env_path.exists():
            load_dotenv(env_path, override=False)


def _configure_logging() -> None:
    """Root level from BLOWUPLAB_LOG_LEVEL, else ``[logging] level``, else WARNING."""
    level_name = os.getenv(_ENV_LOG_LEVEL) or load_user_settings().log_level or "WARNING"
    level = logging.getLevelName(level_name.upper())
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _commands() -> dict[str, Command]:
    from blowuplab import cli  # Lazy so .env values are visible to path resolution.

    return {
        "run": lambda a: cli.run_run(a.config, a.output, a.workers),
        "sweep": lambda a: cli.run_sweep_command(a.config, a.output, a.workers),
        "plot": lambda a: cli.run_plot(a.bundle),
        "validate": lambda a: cli.run_validate(a.config),
        "list-configs": lambda _a: cli.run_list_configs(),
    }


def main() -> None:
    """Dispatch to a direct CLI subcommand, or open the REPL without arguments."""
    _load_env_files()
    _configure_logging()
    ensure_runtime_layout(copy_builtin_configs=True)

    if len(sys.argv) > 1:
        from blowuplab import cli

        args = cli.parse_args()
        command = _commands().get(args.command)
        if command is None:
            print(_USAGE)
            sys.exit(1)
        sys.exit(command(args))

    try:
        from blowuplab.repl import run_repl
    except ImportError:
        print("Error: prompt_toolkit is required for interactive mode.")
        print("Install it with: pip install prompt_toolkit")
        sys.exit(1)

    run_repl()
