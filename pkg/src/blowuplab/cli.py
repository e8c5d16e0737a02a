"""Shared commands and CLI argument parsing for blowuplab.

Every ``run_*`` function returns the process exit code: 0 on success, 1 for
a configuration error, 2 for a runtime error after partial outputs.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from blowuplab.config_loader import (
    list_available_configs,
    load_run_config,
    resolve_config_path,
)
from blowuplab.exceptions import BlowupLabError, ConfigLoadError
from blowuplab.models import RunConfig
from blowuplab.paths import get_config_search_dirs, get_output_dir
from blowuplab.pipeline import run_pipeline, run_sweep
from blowuplab.plotdata import emit_plot_data
from blowuplab.report import print_classification_report, print_sweep_report

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2

# ─── Directory layout ────────────────────────────────────────────────

CONFIG_SEARCH_DIRS = get_config_search_dirs()
OUTPUT_DIR = get_output_dir()


# ─── Commands (used by both CLI and REPL) ────────────────────────────

def _load(config: str) -> RunConfig | None:
    """Resolve and load a config by name or path; print the error and return None on failure."""
    config_path = resolve_config_path(config, CONFIG_SEARCH_DIRS)
    if not config_path:
        available = list_available_configs(CONFIG_SEARCH_DIRS)
        print(f"Error: Config '{config}' not found. Available: {', '.join(available) or 'none'}")
        return None
    try:
        return load_run_config(config_path)
    except ConfigLoadError as e:
        print(f"Error: {e}")
        return None


def _output_root(output: str | None, config: RunConfig) -> Path:
    if output:
        return Path(output).expanduser()
    return config.output_dir or OUTPUT_DIR


def run_run(config: str, output: str | None = None, workers: int | None = None) -> int:
    """Run the full pipeline for one config and print its classification report."""
    run_config = _load(config)
    if run_config is None:
        return EXIT_CONFIG_ERROR

    print("=" * 60)
    print("  Blow-up Lab — Pipeline Run")
    print("=" * 60)

    try:
        root = _output_root(output, run_config)
        result = run_pipeline(run_config, output_root=root, workers=workers)
    except BlowupLabError as e:
        print(f"Error: {e}")
        return EXIT_RUNTIME_ERROR

    print_classification_report(result)
    print("=" * 60)
    print(f"  Done! Bundle: {result.bundle_dir}")
    print("=" * 60)
    return EXIT_RUNTIME_ERROR if result.exit_code else EXIT_OK


def run_sweep_command(config: str, output: str | None = None, workers: int | None = None) -> int:
    """Run the trapping or stability sweep declared in a config."""
    run_config = _load(config)
    if run_config is None:
        return EXIT_CONFIG_ERROR
    if run_config.sweep is None:
        print(f"Error: Config '{run_config.name}' declares no sweep section")
        return EXIT_CONFIG_ERROR

    print("=" * 60)
    print(f"  Blow-up Lab — {run_config.sweep.kind.capitalize()} Sweep")
    print("=" * 60)

    try:
        root = _output_root(output, run_config)
        result = run_sweep(run_config, output_root=root, workers=workers)
    except BlowupLabError as e:
        print(f"Error: {e}")
        return EXIT_RUNTIME_ERROR

    print_sweep_report(result)
    print(f"\n💾 Sweep saved to: {result.bundle_dir}")
    return EXIT_RUNTIME_ERROR if any(p.error for p in result.points) else EXIT_OK


def run_plot(bundle: str) -> int:
    """Write plot-ready data files for an existing bundle."""
    bundle_dir = Path(bundle).expanduser()
    if not bundle_dir.is_dir():
        print(f"Error: Bundle directory not found: {bundle_dir}")
        return EXIT_CONFIG_ERROR

    print("=" * 60)
    print("  Blow-up Lab — Plot Data")
    print("=" * 60)

    plot = emit_plot_data(bundle_dir)
    for path in plot.files:
        print(f"  📄 {path.name}")
    for notice in plot.notices:
        print(f"  ℹ️  {notice}")

    print("=" * 60)
    if not plot.files:
        print("  Nothing to plot.")
        print("=" * 60)
        return EXIT_CONFIG_ERROR
    print(f"  Done! {len(plot.files)} file(s) in: {plot.out_dir}")
    print("=" * 60)
    return EXIT_OK


def run_validate(config: str) -> int:
    """Load a config and print what it would run, without solving anything."""
    run_config = _load(config)
    if run_config is None:
        return EXIT_CONFIG_ERROR

    scenario = run_config.scenario
    print(f"✅ {run_config.name}: valid")
    print(f"   Generator: {scenario.generator}")
    print(f"   p={run_config.params.p:g}, N={run_config.params.N}")
    print(f"   Grid: R={scenario.r_max:g}, {scenario.n_cells} cells, h={scenario.h:g}")
    print(f"   Probes: {', '.join(f'{r0:g}' for r0 in run_config.probes) or 'none'}")
    if run_config.sweep is not None:
        epsilons = ", ".join(f"{e:g}" for e in run_config.sweep.epsilons)
        print(f"   Sweep: {run_config.sweep.kind} over eps = [{epsilons}]")
    return EXIT_OK


def run_list_configs() -> int:
    """List available run configurations."""
    configs = list_available_configs(CONFIG_SEARCH_DIRS)
    if not configs:
        print("No run configs found.")
        return EXIT_OK
    print("Available configs:")
    for name in configs:
        print(f"  - {name}")
    return EXIT_OK


# ─── Argparse (direct CLI mode) ─────────────────────────────────────

def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments for direct CLI mode."""
    parser = argparse.ArgumentParser(
        description="Blow-up Lab: blow-up curves of u_tt = Δu + |u|^(p-1)u and their diagnostics.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    available = list_available_configs(CONFIG_SEARCH_DIRS)
    configs_help = f"Available: {', '.join(available)}" if available else "No configs found"

    run_parser = subparsers.add_parser("run", help="Solve, reconstruct T(r) and classify the probes")
    run_parser.add_argument("config", type=str, help=f"Config name or YAML path. {configs_help}")
    run_parser.add_argument("--output", type=str, default=None, help="Output root override")
    run_parser.add_argument("--workers", type=int, default=None, help="Probe worker threads")

    plot_parser = subparsers.add_parser("plot", help="Write plot-ready data for a bundle")
    plot_parser.add_argument("bundle", type=str, help="Bundle directory written by 'run'")

    validate_parser = subparsers.add_parser("validate", help="Check a config without running it")
    validate_parser.add_argument("config", type=str, help=f"Config name or YAML path. {configs_help}")

    subparsers.add_parser("list-configs", help="List available run configurations")

    sweep_parser = subparsers.add_parser("sweep", help="Run the sweep declared in a config")
    sweep_parser.add_argument("config", type=str, help=f"Config name or YAML path. {configs_help}")
    sweep_parser.add_argument("--output", type=str, default=None, help="Output root override")
    sweep_parser.add_argument("--workers", type=int, default=None, help="Probe worker threads")

    return parser.parse_args(argv)
