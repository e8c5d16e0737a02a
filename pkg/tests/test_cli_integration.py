from __future__ import annotations

from pathlib import Path

import pytest

import blowuplab.cli as cli
from blowuplab.exceptions import SolverError
from blowuplab.models import SweepPoint, SweepResult

RUN_CONFIG = """
name: demo
params: {p: 3, N: 3}
scenario:
  generator: constant-ode
  n_cells: 40
  options: {T: 1.0}
probes: [0.5]
"""

SWEEP_CONFIG = RUN_CONFIG + """
sweep:
  kind: stability
  epsilons: [0.01, 0.02]
"""


def _configs(tmp_path: Path, body: str = RUN_CONFIG) -> Path:
    configs = tmp_path / "configs"
    configs.mkdir(parents=True, exist_ok=True)
    (configs / "demo.yaml").write_text(body.strip() + "\n", encoding="utf-8")
    return configs


class _FakeResult:
    def __init__(self, bundle_dir: Path, exit_code: int = 0) -> None:
        self.bundle_dir = bundle_dir
        self.exit_code = exit_code


def test_run_run_happy_path_invokes_pipeline_with_expected_paths(
    monkeypatch: pytest.MonkeyPatch,
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    captured: dict[str, object] = {}

    def fake_run_pipeline(config, output_root=None, workers=None):
        captured["name"] = config.name
        captured["output_root"] = output_root
        captured["workers"] = workers
        return _FakeResult(output_root / config.name)

    monkeypatch.setattr(cli, "CONFIG_SEARCH_DIRS", [_configs(tmp_path)])
    monkeypatch.setattr(cli, "OUTPUT_DIR", tmp_path / "output")
    monkeypatch.setattr(cli, "run_pipeline", fake_run_pipeline)
    monkeypatch.setattr(cli, "print_classification_report", lambda result: None)

    code = cli.run_run("demo", workers=2)
    output = capsys.readouterr().out

    assert code == 0
    assert "Done! Bundle" in output
    assert captured == {"name": "demo", "output_root": tmp_path / "output", "workers": 2}


def test_run_run_handles_config_not_found(
    monkeypatch: pytest.MonkeyPatch,
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    monkeypatch.setattr(cli, "CONFIG_SEARCH_DIRS", [_configs(tmp_path)])

    code = cli.run_run("missing")
    output = capsys.readouterr().out

    assert code == 1
    assert "Config 'missing' not found" in output
    assert "demo" in output


def test_run_run_reports_invalid_config(
    monkeypatch: pytest.MonkeyPatch,
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    monkeypatch.setattr(cli, "CONFIG_SEARCH_DIRS", [_configs(tmp_path, "name: demo\n")])

    assert cli.run_run("demo") == 1
    assert "Missing required field" in capsys.readouterr().out


def test_run_run_returns_runtime_code_on_errors(
    monkeypatch: pytest.MonkeyPatch,
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    monkeypatch.setattr(cli, "CONFIG_SEARCH_DIRS", [_configs(tmp_path)])
    monkeypatch.setattr(
        cli, "run_pipeline", lambda config, output_root=None, workers=None: _FakeResult(tmp_path, 2)
    )
    monkeypatch.setattr(cli, "print_classification_report", lambda result: None)
    assert cli.run_run("demo", output=str(tmp_path / "out")) == 2

    def failing(config, output_root=None, workers=None):
        raise SolverError(12, "boom")

    monkeypatch.setattr(cli, "run_pipeline", failing)
    assert cli.run_run("demo") == 2
    assert "Error:" in capsys.readouterr().out


def test_run_sweep_command_requires_sweep_section(
    monkeypatch: pytest.MonkeyPatch,
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    monkeypatch.setattr(cli, "CONFIG_SEARCH_DIRS", [_configs(tmp_path)])

    assert cli.run_sweep_command("demo") == 1
    assert "declares no sweep" in capsys.readouterr().out


def test_run_sweep_command_exit_code_follows_member_errors(
    monkeypatch: pytest.MonkeyPatch,
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    monkeypatch.setattr(cli, "CONFIG_SEARCH_DIRS", [_configs(tmp_path, SWEEP_CONFIG)])
    monkeypatch.setattr(cli, "print_sweep_report", lambda result: None)
    good = SweepPoint(epsilon=0.01, blowup_time=1.0, d_fit=0.0, drift=0.0, candidates=(0.5,))
    bad = SweepPoint(epsilon=0.02, blowup_time=1.0, d_fit=0.0, drift=0.0, error="boom")

    def sweep_with(points):
        return lambda config, output_root=None, workers=None: SweepResult(
            kind="stability", points=points, accepted=False, detail="", bundle_dir=tmp_path
        )

    monkeypatch.setattr(cli, "run_sweep", sweep_with((good,)))
    assert cli.run_sweep_command("demo") == 0
    monkeypatch.setattr(cli, "run_sweep", sweep_with((good, bad)))
    assert cli.run_sweep_command("demo") == 2
    assert "Sweep saved to" in capsys.readouterr().out


def test_run_validate_prints_summary(
    monkeypatch: pytest.MonkeyPatch,
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    monkeypatch.setattr(cli, "CONFIG_SEARCH_DIRS", [_configs(tmp_path, SWEEP_CONFIG)])

    assert cli.run_validate("demo") == 0
    output = capsys.readouterr().out
    assert "demo: valid" in output
    assert "constant-ode" in output
    assert "Sweep: stability" in output


def test_run_plot_missing_and_empty_bundles(
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    assert cli.run_plot(str(tmp_path / "nope")) == 1
    assert "Bundle directory not found" in capsys.readouterr().out

    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.run_plot(str(empty)) == 1
    assert "Nothing to plot." in capsys.readouterr().out


def test_run_list_configs(
    monkeypatch: pytest.MonkeyPatch,
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    monkeypatch.setattr(cli, "CONFIG_SEARCH_DIRS", [_configs(tmp_path)])
    cli.run_list_configs()
    assert "  - demo" in capsys.readouterr().out

    monkeypatch.setattr(cli, "CONFIG_SEARCH_DIRS", [tmp_path / "none"])
    cli.run_list_configs()
    assert "No run configs found." in capsys.readouterr().out
