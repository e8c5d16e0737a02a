"""Load and validate run configurations from YAML files."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

import yaml

from blowuplab.exceptions import BlowupLabError, ConfigLoadError
from blowuplab.initial_data import available_generators
from blowuplab.models import AnalysisSettings, Params, RunConfig, Scenario, SweepSettings

SNAPSHOT_FORMATS = ("none", "csv", "npz")
SWEEP_KINDS = ("trapping", "stability")


def load_run_config(config_path: Path) -> RunConfig:
    """Load a run configuration from a YAML file.

    Args:
        config_path: Path to the YAML configuration file.

    Returns:
        Validated RunConfig instance.

    Raises:
        ConfigLoadError: If the file cannot be read, is missing required fields,
            or describes an invalid scenario.
    """
    if not config_path.exists():
        raise ConfigLoadError(str(config_path), "File not found")

    try:
        with open(config_path) as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigLoadError(str(config_path), f"Invalid YAML: {e}") from e

    if not isinstance(raw, dict):
        raise ConfigLoadError(str(config_path), "YAML root must be a mapping/object")

    _validate_required_fields(raw, config_path)

    try:
        return _build_run_config(raw, config_path)
    except ConfigLoadError:
        raise
    except BlowupLabError as e:
        raise ConfigLoadError(str(config_path), str(e)) from e
    except (TypeError, ValueError) as e:
        raise ConfigLoadError(str(config_path), f"Invalid value: {e}") from e


def _build_run_config(raw: dict[str, Any], config_path: Path) -> RunConfig:
    params = Params(p=float(raw["params"]["p"]), N=int(raw["params"]["N"]))
    scenario_raw = _mapping(raw["scenario"], "scenario", config_path)

    generator = str(scenario_raw["generator"])
    if generator not in available_generators():
        raise ConfigLoadError(
            str(config_path),
            f"Unknown generator '{generator}'. Available: {', '.join(available_generators())}",
        )

    options = dict(_mapping(scenario_raw.get("options", {}), "scenario.options", config_path))
    if generator == "custom-table" and "path" in options:
        table = Path(str(options["path"])).expanduser()
        if not table.is_absolute():
            options["path"] = str((config_path.parent / table).resolve())

    scenario = Scenario(
        params=params,
        r_max=float(scenario_raw.get("r_max", 1.0)),
        n_cells=int(scenario_raw.get("n_cells", 400)),
        generator=generator,
        generator_params=options,
        cfl=float(scenario_raw.get("cfl", 0.45)),
        dt=_optional_float(scenario_raw.get("dt")),
        amplitude_ceiling=float(scenario_raw.get("amplitude_ceiling", 1.0e6)),
        max_time=float(scenario_raw.get("max_time", 10.0)),
        max_steps=int(scenario_raw.get("max_steps", 2_000_000)),
        blowup_safety=float(scenario_raw.get("blowup_safety", 0.1)),
        snapshot_interval=_optional_float(scenario_raw.get("snapshot_interval")),
        trace_fraction=float(scenario_raw.get("trace_fraction", 0.1)),
    )

    probes = tuple(float(r0) for r0 in raw.get("probes", ()))
    for r0 in probes:
        if not 0.0 <= r0 <= scenario.r_max:
            raise ConfigLoadError(
                str(config_path), f"Probe r0={r0:g} lies outside [0, {scenario.r_max:g}]"
            )

    analysis = _build_analysis(raw.get("analysis") or {}, config_path)

    output = _mapping(raw.get("output") or {}, "output", config_path)
    snapshot_format = str(output.get("snapshots", "none"))
    if snapshot_format not in SNAPSHOT_FORMATS:
        raise ConfigLoadError(
            str(config_path),
            f"Unknown snapshot format '{snapshot_format}'. "
            f"Use one of: {', '.join(SNAPSHOT_FORMATS)}",
        )
    output_dir = Path(str(output["dir"])).expanduser() if output.get("dir") else None

    return RunConfig(
        name=str(raw["name"]),
        scenario=scenario,
        probes=probes,
        analysis=analysis,
        snapshot_format=snapshot_format,
        output_dir=output_dir,
        seed=int(raw.get("seed", 0)),
        sweep=_build_sweep(raw.get("sweep"), config_path),
        source_path=config_path,
    )


def _build_analysis(raw: Any, config_path: Path) -> AnalysisSettings:
    section = _mapping(raw, "analysis", config_path)
    known = set(AnalysisSettings.__dataclass_fields__)
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigLoadError(str(config_path), f"Unknown analysis keys: {', '.join(unknown)}")
    settings = AnalysisSettings(**section)
    if settings.k_max < 1:
        raise ConfigLoadError(str(config_path), "analysis.k_max must be >= 1")
    if settings.s_samples < 2:
        raise ConfigLoadError(str(config_path), "analysis.s_samples must be >= 2")
    return settings


def _build_sweep(raw: Any, config_path: Path) -> SweepSettings | None:
    if not raw:
        return None
    section = _mapping(raw, "sweep", config_path)
    kind = str(section.get("kind", ""))
    if kind not in SWEEP_KINDS:
        raise ConfigLoadError(
            str(config_path), f"Unknown sweep kind '{kind}'. Use one of: {', '.join(SWEEP_KINDS)}"
        )
    epsilons = tuple(float(e) for e in section.get("epsilons", ()))
    if len(epsilons) < 2:
        raise ConfigLoadError(str(config_path), "sweep.epsilons needs at least two values")
    r0 = section.get("r0")
    return SweepSettings(kind=kind, epsilons=epsilons, r0=None if r0 is None else float(r0))


def list_available_configs(configs_dir: Path | Iterable[Path]) -> list[str]:
    """List available run config files (without extension)."""
    paths = [configs_dir] if isinstance(configs_dir, Path) else list(configs_dir)
    names: set[str] = set()
    for directory in paths:
        if not directory.exists():
            continue
        for file_path in directory.glob("*.yaml"):
            names.add(file_path.stem)
    return sorted(names)


def resolve_config_path(config: str, configs_dir: Path | Iterable[Path]) -> Path | None:
    """Resolve a config given as a file path or as a name found in the config dirs."""
    direct = Path(config).expanduser()
    if direct.suffix in (".yaml", ".yml") and direct.exists():
        return direct
    paths = [configs_dir] if isinstance(configs_dir, Path) else list(configs_dir)
    for directory in paths:
        config_path = directory / f"{config}.yaml"
        if config_path.exists():
            return config_path
    return None


_REQUIRED_FIELDS = ["name", "params", "scenario"]


def _validate_required_fields(raw: dict, config_path: Path) -> None:
    """Validate that all required fields are present in the config."""
    for field in _REQUIRED_FIELDS:
        if field not in raw:
            raise ConfigLoadError(str(config_path), f"Missing required field: '{field}'")
    params = _mapping(raw["params"], "params", config_path)
    for field in ("p", "N"):
        if field not in params:
            raise ConfigLoadError(str(config_path), f"Missing required field: 'params.{field}'")
    scenario = _mapping(raw["scenario"], "scenario", config_path)
    if "generator" not in scenario:
        raise ConfigLoadError(str(config_path), "Missing required field: 'scenario.generator'")


def _mapping(value: Any, name: str, config_path: Path) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigLoadError(str(config_path), f"'{name}' must be a mapping/object")
    return value


def _optional_float(value: Any) -> float | None:
    return None if value is None else float(value)
