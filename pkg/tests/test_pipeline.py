from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

import blowuplab.pipeline as pipeline
from blowuplab.classifier import classify
from blowuplab.exceptions import FitError, PipelineError
from blowuplab.models import (
    AnalysisSettings,
    BlowupCurve,
    Evidence,
    Params,
    ProbeResult,
    RunConfig,
    Scenario,
    SweepPoint,
    SweepSettings,
    Verdict,
)
from blowuplab.plotdata import emit_plot_data
from blowuplab.writers import MANIFEST_FILE, sha256_file

P3 = Params(p=3.0, N=3)


def _config(name: str, generator: str, probes: tuple[float, ...], **scenario: object) -> RunConfig:
    options = scenario.pop("options", {})
    fields = {"params": P3, "r_max": 1.0, "n_cells": 100, "generator": generator}
    fields.update(scenario)
    return RunConfig(
        name=name,
        scenario=Scenario(generator_params=options, **fields),  # type: ignore[arg-type]
        probes=probes,
        analysis=AnalysisSettings(k_max=2),
    )


@pytest.fixture(scope="module")
def ode_result(tmp_path_factory: pytest.TempPathFactory):
    config = _config("ode", "constant-ode", (0.5,), options={"T": 1.0})
    return pipeline.run_pipeline(config, output_root=tmp_path_factory.mktemp("out"), workers=1)


def test_zero_data_run_writes_bundle_without_curve(tmp_path: Path) -> None:
    config = _config("quiet", "zero", (0.5,), n_cells=50, max_time=0.2)
    result = pipeline.run_pipeline(config, output_root=tmp_path)

    assert not result.blew_up
    assert result.probes == ()
    assert result.exit_code == 0
    assert (tmp_path / "quiet" / "curve.csv").exists()
    document = json.loads((tmp_path / "quiet" / "classification.json").read_text())
    assert document["blow_up"] is False
    assert document["points"] == []


def test_manifest_lists_every_file_with_checksum(ode_result) -> None:
    manifest = json.loads((ode_result.bundle_dir / MANIFEST_FILE).read_text())
    listed = {entry["path"] for entry in manifest["files"]}

    assert {"curve.csv", "classification.json", "traces/trace_r0.5.csv"} <= listed
    for entry in manifest["files"]:
        assert entry["sha256"] == sha256_file(ode_result.bundle_dir / entry["path"])
    assert manifest["errors"] == []
    assert manifest["summary"]["blow_up"] is True


def test_constant_ode_probe_is_non_characteristic(ode_result) -> None:
    (probe,) = ode_result.probes
    assert probe.ok
    assert probe.classification is not None
    assert probe.classification.verdict is Verdict.NON_CHARACTERISTIC
    assert probe.selection is not None and probe.selection.k == 1
    assert probe.trace is not None
    assert probe.trace.E[-1] == pytest.approx(4.0 / 3.0, rel=1e-2)
    assert ode_result.checks is not None and ode_result.checks.violations == ()


def test_plot_data_from_pipeline_bundle(ode_result, tmp_path: Path) -> None:
    plot = emit_plot_data(ode_result.bundle_dir, tmp_path / "plot")
    names = {path.name for path in plot.files}
    assert {"curve.dat", "lyapunov_r0.5.dat", "residual_r0.5.dat"} <= names


def test_repeated_runs_write_identical_data_files(tmp_path: Path) -> None:
    config = _config("again", "constant-ode", (0.5,), n_cells=40, options={"T": 1.0})

    def checksums(root: Path) -> dict[str, str]:
        result = pipeline.run_pipeline(config, output_root=root, workers=2)
        manifest = json.loads((result.bundle_dir / MANIFEST_FILE).read_text())
        return {entry["path"]: entry["sha256"] for entry in manifest["files"]}

    first = checksums(tmp_path / "one")
    assert first
    assert checksums(tmp_path / "two") == first


def test_failing_probe_does_not_affect_the_others(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path
) -> None:
    def fake_probe(config, history, curve, r0):
        if r0 == 0.5:
            raise FitError("synthetic failure")
        evidence = Evidence(r0=r0, sign_constant=True)
        return ProbeResult(r0=r0, classification=classify(evidence))

    monkeypatch.setattr(pipeline, "analyze_probe", fake_probe)
    config = _config("isolated", "constant-ode", (0.25, 0.5, 0.75), n_cells=40, options={"T": 1.0})
    result = pipeline.run_pipeline(config, output_root=tmp_path, workers=3)

    by_r0 = {p.r0: p for p in result.probes}
    assert "synthetic failure" in (by_r0[0.5].error or "")
    assert by_r0[0.25].ok and by_r0[0.75].ok
    assert result.exit_code == 2
    manifest = json.loads((tmp_path / "isolated" / MANIFEST_FILE).read_text())
    assert [e["stage"] for e in manifest["errors"]] == ["probe r0.5"]


def test_unexpected_exception_at_one_radius_is_recorded(
    monkeypatch: pytest.MonkeyPatch, tmp_path: Path
) -> None:
    def fake_probe(config, history, curve, r0):
        if r0 == 0.5:
            raise ValueError("array of sample 0 is empty")
        return ProbeResult(r0=r0, classification=classify(Evidence(r0=r0, sign_constant=True)))

    monkeypatch.setattr(pipeline, "analyze_probe", fake_probe)
    config = _config("crash", "constant-ode", (0.25, 0.5), n_cells=40, options={"T": 1.0})
    result = pipeline.run_pipeline(config, output_root=tmp_path, workers=2)

    by_r0 = {p.r0: p for p in result.probes}
    assert by_r0[0.5].error == "ValueError: array of sample 0 is empty"
    assert by_r0[0.25].ok
    assert result.exit_code == 2
    manifest = json.loads((tmp_path / "crash" / MANIFEST_FILE).read_text())
    assert manifest["errors"][0]["reason"].startswith("ValueError")


def _peaked_curve(h: float = 0.01) -> BlowupCurve:
    r = np.linspace(0.5, 1.5, 101)
    T = np.maximum(1.0 - np.abs(r - 1.2), 0.7)
    return BlowupCurve(
        r=r,
        T=T,
        dT=np.gradient(T, r),
        residual=np.zeros_like(r),
        method=("fit",) * r.size,
        h=h,
        lipschitz_excess=0.0,
    )


def test_local_maxima_of_the_curve_become_extra_radii(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    config = _config("peaks", "zero", (0.6, 0.9))

    def radii_for(run: RunConfig) -> tuple[float, ...]:
        return pipeline.BlowupPipeline(run, output_root=tmp_path)._analysis_radii(_peaked_curve())

    radii = radii_for(config)

    assert radii == pytest.approx((0.6, 0.9, 1.2))
    assert "local maxima" in capsys.readouterr().out

    covered = replace(config, probes=(0.6, 1.201))
    assert radii_for(covered) == (0.6, 1.201)

    off = replace(config, analysis=AnalysisSettings(k_max=2, analyze_peaks=False))
    assert radii_for(off) == (0.6, 0.9)


def test_seed_is_filled_into_noise_block() -> None:
    config = _config("noisy", "zero", (), options={"noise": {"amplitude": 0.1}})
    config = replace(config, seed=11)
    assert pipeline._seeded_options(config)["noise"] == {"amplitude": 0.1, "seed": 11}


def test_sweep_requires_section_and_matching_generator(tmp_path: Path) -> None:
    config = _config("plain", "zero", ())
    with pytest.raises(PipelineError):
        pipeline.run_sweep(config, tmp_path)

    trapping = replace(config, sweep=SweepSettings(kind="trapping", epsilons=(0.01, 0.02)))
    with pytest.raises(PipelineError, match="selfsimilar"):
        pipeline.run_sweep(trapping, tmp_path)


def _point(eps: float, drift: float) -> SweepPoint:
    return SweepPoint(epsilon=eps, blowup_time=1.0, d_fit=0.3, drift=drift)


def test_trapping_verdict_accepts_linear_drift() -> None:
    ok, detail = pipeline.trapping_verdict([_point(e, 0.5 * e) for e in (0.005, 0.01, 0.02)])
    assert ok
    assert detail.startswith("drift/eps")


def test_trapping_verdict_rejects_superlinear_drift() -> None:
    ok, _ = pipeline.trapping_verdict([_point(e, 40.0 * e * e) for e in (0.005, 0.02, 0.08)])
    assert not ok


def test_trapping_verdict_needs_two_usable_members() -> None:
    failed = SweepPoint(epsilon=0.02, blowup_time=math.nan, d_fit=math.nan, drift=math.nan, error="x")
    ok, detail = pipeline.trapping_verdict([_point(0.01, 0.001), failed])
    assert not ok
    assert "1 usable" in detail
