from __future__ import annotations

import pytest

from blowuplab.cli import parse_args


def test_parse_args_run() -> None:
    args = parse_args(["run", "bump", "--output", "out", "--workers", "3"])
    assert args.command == "run"
    assert args.config == "bump"
    assert args.output == "out"
    assert args.workers == 3


def test_parse_args_run_defaults() -> None:
    args = parse_args(["run", "configs/bump.yaml"])
    assert args.output is None
    assert args.workers is None


def test_parse_args_plot_and_validate() -> None:
    plot = parse_args(["plot", "output/bump"])
    validate = parse_args(["validate", "zero_data"])
    assert plot.command == "plot"
    assert plot.bundle.endswith("bump")
    assert validate.command == "validate"
    assert validate.config == "zero_data"


def test_parse_args_sweep_and_list_configs() -> None:
    sweep = parse_args(["sweep", "plateau_stability", "--workers", "2"])
    assert sweep.command == "sweep"
    assert sweep.workers == 2
    assert parse_args(["list-configs"]).command == "list-configs"


def test_parse_args_rejects_missing_config() -> None:
    with pytest.raises(SystemExit):
        parse_args(["run"])
