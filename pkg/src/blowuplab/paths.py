"""Where blowuplab reads configs from and writes bundles to.

Precedence for every location is: environment variable, then
``~/.blowuplab/config.toml``, then the repository checkout, then the
per-user application directory.
"""

from __future__ import annotations

import logging
import os
import shutil

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib  # type: ignore[no-redef]
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

PACKAGE_DIR = Path(__file__).resolve().parent
REPO_ROOT = PACKAGE_DIR.parent.parent
APP_DIRNAME = ".blowuplab"

_ENV_HOME = "BLOWUPLAB_HOME"
_ENV_CONFIGS = "BLOWUPLAB_CONFIGS_DIR"
_ENV_OUTPUT = "BLOWUPLAB_OUTPUT_DIR"
_ENV_WORKERS = "BLOWUPLAB_WORKERS"


@dataclass(frozen=True)
class UserSettings:
    """Optional defaults from ``config.toml``.

    ``[run] workers``, ``[output] dir`` and ``[logging] level``; anything
    missing or of the wrong type stays ``None``.
    """

    workers: int | None = None
    output_dir: Path | None = None
    log_level: str | None = None


@dataclass(frozen=True)
class RuntimeLayout:
    app_dir: Path
    settings_file: Path
    user_configs_dir: Path
    user_output_dir: Path
    copied_builtin_configs: tuple[Path, ...] = ()


def _env_path(name: str) -> Path | None:
    value = os.getenv(name)
    return Path(value).expanduser() if value else None


def get_app_dir() -> Path:
    return _env_path(_ENV_HOME) or Path.home() / APP_DIRNAME


def get_builtin_configs_dir() -> Path:
    return PACKAGE_DIR / "builtin_configs"


def get_user_configs_dir() -> Path:
    return get_app_dir() / "configs"


def get_user_output_dir() -> Path:
    return get_app_dir() / "output"


def get_settings_file() -> Path:
    return get_app_dir() / "config.toml"


def is_repo_checkout_mode() -> bool:
    """True when running from a source tree that still has its ``configs/``."""
    return (REPO_ROOT / "pyproject.toml").exists() and (REPO_ROOT / "configs").is_dir()


def load_user_settings() -> UserSettings:
    """Parse ``config.toml``; an unreadable file yields default settings."""
    settings_file = get_settings_file()
    if not settings_file.exists():
        return UserSettings()
    try:
        with open(settings_file, "rb") as handle:
            raw = tomllib.load(handle)
    except (OSError, tomllib.TOMLDecodeError) as e:
        logger.warning("ignoring unreadable %s: %s", settings_file, e)
        return UserSettings()

    workers = raw.get("run", {}).get("workers") if isinstance(raw.get("run"), dict) else None
    if not isinstance(workers, int) or isinstance(workers, bool):
        workers = None
    output = raw.get("output", {}).get("dir") if isinstance(raw.get("output"), dict) else None
    level = raw.get("logging", {}).get("level") if isinstance(raw.get("logging"), dict) else None
    return UserSettings(
        workers=workers,
        output_dir=Path(output).expanduser() if isinstance(output, str) and output else None,
        log_level=level.upper() if isinstance(level, str) and level else None,
    )


def get_config_search_dirs() -> list[Path]:
    """Config directories by precedence: checkout, user, package builtins."""
    override = _env_path(_ENV_CONFIGS)
    if override:
        return [override]

    candidates = [REPO_ROOT / "configs", get_user_configs_dir(), get_builtin_configs_dir()]
    ordered = [d for d in candidates if d.exists() or d == get_user_configs_dir()]
    return list(dict.fromkeys(ordered))


def get_output_dir() -> Path:
    """Root under which run bundles are written."""
    override = _env_path(_ENV_OUTPUT) or load_user_settings().output_dir
    if override:
        return override
    if is_repo_checkout_mode():
        return REPO_ROOT / "output"
    return get_user_output_dir()


def get_bundle_dir(run_name: str, output_root: Path | None = None) -> Path:
    return (output_root or get_output_dir()) / run_name


def resolve_workers(explicit: int | None = None) -> int:
    """Probe pool size: explicit arg, env var, ``[run] workers``, else 1."""
    if explicit is not None:
        return max(1, int(explicit))

    env_workers = os.getenv(_ENV_WORKERS)
    if env_workers:
        try:
            return max(1, int(env_workers))
        except ValueError:
            logger.warning("%s=%r is not an integer; using 1 worker", _ENV_WORKERS, env_workers)
            return 1

    configured = load_user_settings().workers
    return max(1, configured) if configured is not None else 1


def _seed_builtin_configs(destination: Path) -> tuple[Path, ...]:
    source_dir = get_builtin_configs_dir()
    if not source_dir.exists():
        return ()
    copied: list[Path] = []
    for source in sorted(source_dir.glob("*.yaml")):
        target = destination / source.name
        if target.exists():
            continue
        shutil.copy2(source, target)
        copied.append(target)
    if copied:
        logger.debug("seeded %d builtin configs into %s", len(copied), destination)
    return tuple(copied)


def ensure_runtime_layout(copy_builtin_configs: bool = True) -> RuntimeLayout:
    """Create the application directories; never overwrites a user's config."""
    app_dir = get_app_dir()
    user_configs = get_user_configs_dir()
    user_output = get_user_output_dir()
    for directory in (app_dir, user_configs, user_output):
        directory.mkdir(parents=True, exist_ok=True)

    copied = _seed_builtin_configs(user_configs) if copy_builtin_configs else ()
    return RuntimeLayout(
        app_dir=app_dir,
        settings_file=get_settings_file(),
        user_configs_dir=user_configs,
        user_output_dir=user_output,
        copied_builtin_configs=copied,
    )
