from __future__ import annotations

from pathlib import Path

from blowuplab import paths


def test_output_dir_uses_env_override(monkeypatch, tmp_path: Path) -> None:
    override = tmp_path / "custom-output"
    monkeypatch.setenv("BLOWUPLAB_OUTPUT_DIR", str(override))
    assert paths.get_output_dir() == override
    assert paths.get_bundle_dir("demo") == override / "demo"


def test_configs_dir_env_override_replaces_search_path(monkeypatch, tmp_path: Path) -> None:
    monkeypatch.setenv("BLOWUPLAB_CONFIGS_DIR", str(tmp_path))
    assert paths.get_config_search_dirs() == [tmp_path]


def test_get_config_search_dirs_includes_user_dir(monkeypatch, tmp_path: Path) -> None:
    monkeypatch.delenv("BLOWUPLAB_CONFIGS_DIR", raising=False)
    monkeypatch.setenv("BLOWUPLAB_HOME", str(tmp_path / "home"))
    search_dirs = paths.get_config_search_dirs()
    assert paths.get_user_configs_dir() in search_dirs


def test_resolve_workers_prefers_explicit_value(monkeypatch) -> None:
    monkeypatch.setenv("BLOWUPLAB_WORKERS", "8")
    assert paths.resolve_workers(3) == 3
    assert paths.resolve_workers(0) == 1


def test_resolve_workers_reads_env(monkeypatch) -> None:
    monkeypatch.setenv("BLOWUPLAB_WORKERS", "4")
    assert paths.resolve_workers() == 4

    monkeypatch.setenv("BLOWUPLAB_WORKERS", "many")
    assert paths.resolve_workers() == 1


def test_resolve_workers_reads_toml_file(monkeypatch, tmp_path: Path) -> None:
    monkeypatch.delenv("BLOWUPLAB_WORKERS", raising=False)
    monkeypatch.setenv("BLOWUPLAB_HOME", str(tmp_path))
    (tmp_path / "config.toml").write_text("[run]\nworkers = 6\n", encoding="utf-8")

    assert paths.resolve_workers() == 6


def test_unreadable_toml_is_ignored(monkeypatch, tmp_path: Path) -> None:
    monkeypatch.delenv("BLOWUPLAB_WORKERS", raising=False)
    monkeypatch.setenv("BLOWUPLAB_HOME", str(tmp_path))
    (tmp_path / "config.toml").write_text("[run\n", encoding="utf-8")

    assert paths.load_user_settings() == paths.UserSettings()
    assert paths.resolve_workers() == 1


def test_ensure_runtime_layout_creates_directories_and_copies_builtin_configs(
    monkeypatch, tmp_path: Path
) -> None:
    monkeypatch.setenv("BLOWUPLAB_HOME", str(tmp_path / "home"))

    fake_package_dir = tmp_path / "package"
    builtin = fake_package_dir / "builtin_configs"
    builtin.mkdir(parents=True)
    (builtin / "alpha.yaml").write_text("name: alpha\n", encoding="utf-8")

    monkeypatch.setattr(paths, "PACKAGE_DIR", fake_package_dir)

    layout = paths.ensure_runtime_layout(copy_builtin_configs=True)

    assert layout.app_dir.exists()
    assert layout.user_configs_dir.exists()
    assert layout.user_output_dir.exists()
    assert (layout.user_configs_dir / "alpha.yaml").exists()
    assert len(layout.copied_builtin_configs) == 1


def test_ensure_runtime_layout_does_not_overwrite_existing_user_config(
    monkeypatch, tmp_path: Path
) -> None:
    monkeypatch.setenv("BLOWUPLAB_HOME", str(tmp_path / "home"))
    fake_package_dir = tmp_path / "package"
    builtin = fake_package_dir / "builtin_configs"
    builtin.mkdir(parents=True)
    (builtin / "alpha.yaml").write_text("name: builtin\n", encoding="utf-8")
    monkeypatch.setattr(paths, "PACKAGE_DIR", fake_package_dir)

    existing = paths.get_user_configs_dir() / "alpha.yaml"
    existing.parent.mkdir(parents=True, exist_ok=True)
    existing.write_text("name: custom\n", encoding="utf-8")

    layout = paths.ensure_runtime_layout(copy_builtin_configs=True)

    assert existing.read_text(encoding="utf-8") == "name: custom\n"
    assert len(layout.copied_builtin_configs) == 0


def test_user_settings_supply_output_dir_and_log_level(monkeypatch, tmp_path: Path) -> None:
    monkeypatch.delenv("BLOWUPLAB_OUTPUT_DIR", raising=False)
    monkeypatch.setenv("BLOWUPLAB_HOME", str(tmp_path))
    (tmp_path / "config.toml").write_text(
        f'[output]\ndir = "{tmp_path / "bundles"}"\n\n[logging]\nlevel = "debug"\n\n'
        '[run]\nworkers = true\n',
        encoding="utf-8",
    )

    settings = paths.load_user_settings()

    assert settings == paths.UserSettings(
        workers=None, output_dir=tmp_path / "bundles", log_level="DEBUG"
    )
    assert paths.get_output_dir() == tmp_path / "bundles"


def test_env_output_dir_beats_user_settings(monkeypatch, tmp_path: Path) -> None:
    monkeypatch.setenv("BLOWUPLAB_HOME", str(tmp_path))
    monkeypatch.setenv("BLOWUPLAB_OUTPUT_DIR", str(tmp_path / "env"))
    (tmp_path / "config.toml").write_text('[output]\ndir = "elsewhere"\n', encoding="utf-8")

    assert paths.get_output_dir() == tmp_path / "env"
