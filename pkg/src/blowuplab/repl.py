"""Interactive REPL with step-by-step wizards for blowuplab."""

from __future__ import annotations

import json
import shlex
from collections.abc import Callable
from pathlib import Path

from prompt_toolkit import PromptSession
from prompt_toolkit.completion import WordCompleter
from prompt_toolkit.formatted_text import HTML
from prompt_toolkit.history import InMemoryHistory

from blowuplab.cli import (
    CONFIG_SEARCH_DIRS,
    OUTPUT_DIR,
    run_list_configs,
    run_plot,
    run_run,
    run_sweep_command,
    run_validate,
)
from blowuplab.config_loader import list_available_configs
from blowuplab.models import Verdict
from blowuplab.paths import ensure_runtime_layout
from blowuplab.writers import MANIFEST_FILE

ReplHandler = Callable[[list[str], PromptSession], None]


# ─── Banner & help ───────────────────────────────────────────────────

BANNER = """
\033[1;36m╔══════════════════════════════════════════════════════════════╗
║                                                              ║
║   Blow-up Lab                                                ║
║                                                              ║
║   u_tt = Δu + |u|^(p-1) u, radial                            ║
║   blow-up curves, similarity variables, soliton fits         ║
║                                                              ║
╚══════════════════════════════════════════════════════════════╝\033[0m

  Type \033[1m/help\033[0m to see available commands, \033[1mCtrl+C\033[0m to exit.
"""

HELP_TEXT = """
\033[1mAvailable commands:\033[0m

  \033[1;32m/run\033[0m [config]
      Solve a scenario, reconstruct T(r) and classify its probes.
      Without an argument, lists the configs and you pick by number.

  \033[1;32m/plot\033[0m [bundle-dir]
      Write plot-ready data for a bundle.
      Without an argument, lists the bundles under the output directory.

  \033[1;32m/validate\033[0m [config]
      Check a config without running it.

  \033[1;32m/sweep\033[0m [config]
      Run the trapping or stability sweep declared in a config.

  \033[1;32m/configs\033[0m
      List available run configurations.

  \033[1;32m/bundles\033[0m
      List finished bundles with their verdict counts.

  \033[1;32m/help\033[0m
      Show this help message.

  \033[1;32m/quit\033[0m or \033[1mCtrl+C\033[0m
      Exit Blow-up Lab.

\033[1mPipeline:\033[0m  /validate → /run → /plot
"""


# ─── Prompt helpers ──────────────────────────────────────────────────

def _select_from_list(title: str, items: list[str], session: PromptSession) -> str | None:
    """Present a numbered list and let user pick by number.

    Returns:
        Selected item, or None if cancelled.
    """
    print(f"\n\033[1m{title}\033[0m\n")
    for idx, item in enumerate(items, start=1):
        print(f"  \033[1;36m[{idx}]\033[0m {item}")
    print()

    try:
        choice = session.prompt(
            HTML("<b><ansigreen>  ❯ </ansigreen></b>Select (number): "),
        ).strip()
    except (KeyboardInterrupt, EOFError):
        print("  Cancelled.")
        return None

    if not choice.isdigit() or int(choice) < 1 or int(choice) > len(items):
        print(f"  Invalid choice: {choice}")
        return None

    return items[int(choice) - 1]


def _list_bundles(output_dir: Path) -> list[Path]:
    """Directories under the output root that hold a manifest, sorted."""
    if not output_dir.exists():
        return []
    return sorted(p.parent for p in output_dir.glob(f"*/{MANIFEST_FILE}"))


_VERDICT_ABBREV = {
    Verdict.NON_CHARACTERISTIC.value: "non-char",
    Verdict.CHARACTERISTIC_CANDIDATE.value: "cand",
    Verdict.UNDETERMINED.value: "undet",
}


def _bundle_line(bundle: Path) -> str:
    """One-line digest of a bundle's manifest summary."""
    try:
        manifest = json.loads((bundle / MANIFEST_FILE).read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return f"{bundle.name}  (unreadable manifest)"

    summary = manifest.get("summary") or {}
    verdicts = summary.get("verdicts") or {}
    counts = " · ".join(
        f"{label} {verdicts.get(value, 0)}" for value, label in _VERDICT_ABBREV.items()
    )
    blow_up = "yes" if summary.get("blow_up") else "no"
    errors = len(manifest.get("errors") or [])
    return f"{bundle.name}  blow-up: {blow_up}  {counts}  errors {errors}"


def _show_bundles(_tokens: list[str], _session: PromptSession) -> None:
    bundles = _list_bundles(OUTPUT_DIR)
    if not bundles:
        print(f"  No bundles found in {OUTPUT_DIR}.")
        return
    print(f"\n\033[1mBundles in {OUTPUT_DIR}:\033[0m\n")
    for bundle in bundles:
        print(f"  {_bundle_line(bundle)}")


def _pick_config(tokens: list[str], session: PromptSession) -> str | None:
    if tokens:
        return tokens[0]
    configs = list_available_configs(CONFIG_SEARCH_DIRS)
    if not configs:
        print("  No run configs found.")
        return None
    return _select_from_list("Select a config:", configs, session)


# ─── Wizards ─────────────────────────────────────────────────────────

def _wizard_run(tokens: list[str], session: PromptSession) -> None:
    """Step-by-step wizard for /run."""
    config = _pick_config(tokens, session)
    if config:
        print()
        run_run(config)


def _wizard_sweep(tokens: list[str], session: PromptSession) -> None:
    config = _pick_config(tokens, session)
    if config:
        print()
        run_sweep_command(config)


def _wizard_validate(tokens: list[str], session: PromptSession) -> None:
    config = _pick_config(tokens, session)
    if config:
        run_validate(config)


def _wizard_plot(tokens: list[str], session: PromptSession) -> None:
    """Step-by-step wizard for /plot."""
    if tokens:
        run_plot(tokens[0])
        return

    bundles = _list_bundles(OUTPUT_DIR)
    if not bundles:
        print(f"  No bundles found in {OUTPUT_DIR}. Run /run first.")
        return

    choice = _select_from_list("Select a bundle:", [b.name for b in bundles], session)
    if not choice:
        return
    print()
    run_plot(str(OUTPUT_DIR / choice))


# ─── Command dispatch ────────────────────────────────────────────────

REPL_COMMANDS: dict[str, ReplHandler] = {
    "/run": _wizard_run,
    "/plot": _wizard_plot,
    "/validate": _wizard_validate,
    "/sweep": _wizard_sweep,
    "/configs": lambda _t, _s: run_list_configs(),
    "/bundles": _show_bundles,
    "/help": lambda _t, _s: print(HELP_TEXT),
}


# ─── REPL loop ───────────────────────────────────────────────────────

def run_repl() -> None:
    """Launch the interactive REPL with step-by-step wizards."""
    ensure_runtime_layout(copy_builtin_configs=True)
    print(BANNER)

    session: PromptSession = PromptSession(
        history=InMemoryHistory(),
        completer=WordCompleter([*REPL_COMMANDS, "/quit"], sentence=True),
        bottom_toolbar=HTML("<ansigray>  /help · /validate → /run → /plot · /quit</ansigray>"),
    )

    while True:
        try:
            user_input = session.prompt(
                HTML("\n<b><ansigreen>blowuplab</ansigreen></b><b> ❯ </b>"),
            ).strip()
        except (KeyboardInterrupt, EOFError):
            print("\n👋 Goodbye!")
            break

        if not user_input:
            continue

        if user_input in ("/quit", "/exit", "/q"):
            print("👋 Goodbye!")
            break

        try:
            tokens = shlex.split(user_input)
        except ValueError as e:
            print(f"Parse error: {e}")
            continue

        cmd = tokens[0]
        cmd_args = tokens[1:]

        handler = REPL_COMMANDS.get(cmd)
        if handler is not None:
            try:
                handler(cmd_args, session)
            except Exception as e:
                print(f"❌ Error: {e}")
        else:
            print(f"Unknown command: {cmd}. Type /help for available commands.")
