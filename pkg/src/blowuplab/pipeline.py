"""Run orchestration: solve → blow-up curve → per-probe analysis → bundle.

Probes are analysed in a thread pool; each worker hands its tables to the
bundle's single writer. A probe that fails is recorded as an error and never
touches another probe's files.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from blowuplab import __version__
from blowuplab.classifier import (
    classify,
    cone_test,
    convergence_rate,
    corner_fit,
    corner_rows,
    energy_criterion,
    energy_gap_constant,
    global_checks,
    local_maxima,
    slope_match,
    speed_trace,
)
from blowuplab.exceptions import (
    BlowupLabError,
    DomainError,
    EmptyCurveError,
    FitError,
    FrameError,
    PipelineError,
)
from blowuplab.functionals import boundedness_density, similarity_grid
from blowuplab.models import (
    BlowupCurve,
    BoundednessReport,
    Evidence,
    FloatArray,
    PipelineResult,
    ProbeResult,
    RunConfig,
    SimilarityFrame,
    SolutionHistory,
    SweepPoint,
    SweepResult,
    Verdict,
)
from blowuplab.paths import get_bundle_dir, resolve_workers
from blowuplab.similarity import (
    boundedness_radii,
    boundedness_report,
    frame_s_range,
    sign_constant_in_cone,
    soliton_energy,
    to_similarity_frame,
    trace_from_frames,
)
from blowuplab.solitons import fit_along_trace, fit_single, select_k, zeta_trace
from blowuplab.solver import blowup_curve, init_scenario, ode_gap, run
from blowuplab.spinner import ProgressBar, Spinner
from blowuplab.writers import (
    CLASSIFICATION_FILE,
    CORNER_DIR,
    CURVE_FILE,
    FITS_DIR,
    SWEEP_FILE,
    TRACES_DIR,
    BundleWriter,
    probe_tag,
)

logger = logging.getLogger(__name__)

CURVE_FIELDS = ["r", "T", "dT", "fit_residual", "method"]
TRACE_FIELDS = ["s", "E", "F", "H", "dFds", "dissipation"]
CORNER_FIELDS = ["r", "gap", "log_log_gap", "excess", "slope_excess"]
SWEEP_FIELDS = ["epsilon", "blowup_time", "d_fit", "drift", "candidates", "error"]
MIN_FRAMES = 2
TRAPPING_TOLERANCE = 1.0e-3


def fit_fields(k_max: int) -> list[str]:
    head = ["s", "theta", "d", "single_residual", "single_converged"]
    multi = ["k", "e1", "residual", "converged", "degenerate"]
    zetas = [f"zeta{i}" for i in range(1, k_max + 1)]
    nus = [f"nu{i}" for i in range(1, k_max + 1)]
    return head + multi + zetas + nus


class BlowupPipeline:
    """Orchestrates one run of a configuration.

    Integrates the scenario, reconstructs T(r), analyses every probe and
    writes the bundle under ``<output_root>/<config.name>``.
    """

    def __init__(
        self,
        config: RunConfig,
        output_root: Path | None = None,
        workers: int | None = None,
    ) -> None:
        self._config = config
        self._bundle_dir = get_bundle_dir(config.name, output_root or config.output_dir)
        self._workers = resolve_workers(workers)

    @property
    def bundle_dir(self) -> Path:
        return self._bundle_dir

    # ── Stages ──

    def solve(self) -> SolutionHistory:
        """Integrate the configured scenario until every node is dead or time runs out."""
        scenario = self._config.scenario
        scenario = replace(scenario, generator_params=_seeded_options(self._config))
        state = init_scenario(scenario)
        with Spinner(f"Integrating {scenario.n_cells + 1} nodes") as spinner:
            history = run(
                state,
                scenario,
                on_step=lambda s: spinner.status(f"t={s.t:.6f} alive={int(s.alive.sum())}"),
            )
        return history

    def analyze_probe(
        self, history: SolutionHistory, curve: BlowupCurve, r0: float
    ) -> ProbeResult:
        """Frames, Lyapunov trace, fits and evidence for one probe radius.

        Raises:
            BlowupLabError: If a stage the verdict depends on fails.
        """
        return analyze_probe(self._config, history, curve, r0)

    def run(self) -> PipelineResult:
        """Execute every stage and write the bundle; stage failures land in the manifest."""
        config = self._config
        started = time.perf_counter()
        writer = BundleWriter(self._bundle_dir)
        errors: list[dict[str, str]] = []

        print(f"🔧 Scenario: {config.name} ({config.scenario.generator})")
        print(
            f"📐 p={config.params.p:g}, N={config.params.N}, R={config.scenario.r_max:g}, "
            f"h={config.scenario.h:g}"
        )

        try:
            history = self.solve()
        except BlowupLabError as e:
            errors.append({"stage": "solve", "reason": str(e)})
            print(f"❌ Solver failed: {e}")
            elapsed = time.perf_counter() - started
            manifest = writer.manifest(config.to_dict(), __version__, elapsed, errors)
            return PipelineResult(
                config=config,
                bundle_dir=self._bundle_dir,
                history=None,
                curve=None,
                probes=(),
                checks=None,
                errors=tuple(errors),
                manifest_path=manifest,
            )
        print(f"✅ Solver stopped ({history.stop_reason}) at t={history.final_time:.6g}")

        writer.snapshots(history, config.snapshot_format)

        curve: BlowupCurve | None
        try:
            curve = blowup_curve(history)
        except EmptyCurveError:
            curve = None
            print("ℹ️  No blow-up: the curve is empty")

        probes: tuple[ProbeResult, ...] = ()
        checks = None
        if curve is None:
            writer.csv(CURVE_FILE, [], CURVE_FIELDS, comments=_curve_comments(config, None))
        else:
            writer.csv(
                CURVE_FILE, curve.to_rows(), CURVE_FIELDS, comments=_curve_comments(config, curve)
            )
            print(f"📈 Blow-up curve: T in [{np.nanmin(curve.T):.6g}, {np.nanmax(curve.T):.6g}]")
            probes = self._analyze_all(history, curve, writer, errors)
            checks = global_checks(
                [p.classification for p in probes if p.classification is not None], curve
            )

        writer.json(CLASSIFICATION_FILE, _classification_document(config, curve, probes, checks))
        summary = _summary(curve, probes, history)
        manifest = writer.manifest(
            config.to_dict(), __version__, time.perf_counter() - started, errors, summary
        )
        print(f"💾 Bundle saved to: {self._bundle_dir}")
        return PipelineResult(
            config=config,
            bundle_dir=self._bundle_dir,
            history=history,
            curve=curve,
            probes=probes,
            checks=checks,
            errors=tuple(errors),
            manifest_path=manifest,
        )

    def _analysis_radii(self, curve: BlowupCurve) -> tuple[float, ...]:
        """Configured probes plus the local maxima of T(r) that no probe already covers."""
        configured = self._config.probes
        if not self._config.analysis.analyze_peaks:
            return configured
        extra = [
            r
            for r in local_maxima(curve)
            if r > 0.0 and all(abs(r - q) > 0.5 * curve.h for q in configured)
        ]
        if extra:
            where = ", ".join(f"{r:g}" for r in extra)
            print(f"📍 Adding {len(extra)} radius(es) at local maxima of T(r): {where}")
        return tuple(sorted((*configured, *extra)))

    def _analyze_all(
        self,
        history: SolutionHistory,
        curve: BlowupCurve,
        writer: BundleWriter,
        errors: list[dict[str, str]],
    ) -> tuple[ProbeResult, ...]:
        probes = self._analysis_radii(curve)
        if not probes:
            return ()
        print(f"🔬 Analysing {len(probes)} probes with {self._workers} worker(s)...")
        progress = ProgressBar(len(probes), label="Probes")
        results: list[ProbeResult] = []
        with ThreadPoolExecutor(max_workers=self._workers) as pool:
            futures = {
                pool.submit(self._guarded_probe, history, curve, r0, writer): r0 for r0 in probes
            }
            for done, future in enumerate(as_completed(futures), start=1):
                results.append(future.result())
                progress.update(done)
        progress.finish()

        results.sort(key=lambda p: p.r0)
        for probe in results:
            if probe.error is not None:
                errors.append({"stage": f"probe {probe_tag(probe.r0)}", "reason": probe.error})
                print(f"⚠️  Probe r0={probe.r0:g} failed: {probe.error}")
        return tuple(results)

    def _guarded_probe(
        self, history: SolutionHistory, curve: BlowupCurve, r0: float, writer: BundleWriter
    ) -> ProbeResult:
        try:
            probe = self.analyze_probe(history, curve, r0)
        except BlowupLabError as e:
            logger.info("probe r0=%g failed: %s", r0, e)
            return ProbeResult(r0=r0, error=str(e))
        except Exception as e:
            logger.exception("analysis at r0=%g crashed", r0)
            return ProbeResult(r0=r0, error=f"{type(e).__name__}: {e}")
        try:
            write_probe_files(writer, probe, self._config.analysis.k_max, curve)
        except OSError as e:
            return replace(probe, error=f"writing probe files failed: {e}")
        return probe


def run_pipeline(
    config: RunConfig, output_root: Path | None = None, workers: int | None = None
) -> PipelineResult:
    """Run one configuration end to end and return its result."""
    return BlowupPipeline(config, output_root=output_root, workers=workers).run()


# ─── Per-probe analysis ──────────────────────────────────────────────

def analyze_probe(
    config: RunConfig, history: SolutionHistory, curve: BlowupCurve, r0: float
) -> ProbeResult:
    """Frames, Lyapunov trace, fits, evidence and verdict at one probe radius.

    Raises:
        PipelineError: If the probe has no finite blow-up time or too few frames.
        BlowupLabError: Any other failure of a stage the verdict depends on.
    """
    settings = config.analysis
    params = config.params
    blowup_time = curve.value_at(r0)
    if not math.isfinite(blowup_time):
        raise PipelineError("probe", f"no finite blow-up time at r0={r0:g}")

    sign_constant = sign_constant_in_cone(history, r0, blowup_time)
    if r0 == 0.0:
        evidence = Evidence(r0=r0, on_axis=True, sign_constant=sign_constant)
        return ProbeResult(r0=r0, classification=classify(evidence), notes=("axis probe",))

    notes: list[str] = []
    node = curve.index_of(r0)
    gap = ode_gap(params, config.scenario.amplitude_ceiling)
    death = float(history.death_time[node])
    if math.isfinite(death):
        gap = max(gap, blowup_time - death)
    s_values = frame_s_range(
        blowup_time,
        r0,
        gap,
        history.h,
        settings.s_samples,
        settings.s_start_offset,
        settings.s_end_offset,
        settings.min_frame_cells,
    )
    y = similarity_grid(settings.n_y, settings.eta)
    frames: list[SimilarityFrame] = []
    for s in s_values:
        try:
            frames.append(to_similarity_frame(history, r0, float(s), blowup_time, y))
        except FrameError as e:
            logger.debug("r0=%g: skipping frame: %s", r0, e)
    if len(frames) < MIN_FRAMES:
        raise PipelineError(
            "frames", f"r0={r0:g} has {len(frames)} usable frames (need {MIN_FRAMES})"
        )
    if len(frames) < len(s_values):
        notes.append(f"{len(s_values) - len(frames)} frames skipped")

    trace = trace_from_frames(frames, settings.gamma)
    ek0 = soliton_energy(frames[0])
    bounds = _boundedness(history, curve, r0, s_values, frames, settings.growth_factor, y, notes)
    c3 = settings.c3_safety * energy_gap_constant(trace)

    single_fits = tuple(fit_single(frame) for frame in frames)
    selection = select_k(frames[-1], settings.k_max, settings.k_threshold)
    k = selection.k
    if not selection.accepted:
        notes.append(
            f"k={k} not accepted: no fit within {settings.k_threshold:.0%} of the frame norm"
        )

    multi_fits = fit_along_trace(frames, k) if k >= 1 else ()
    zeta = None
    if multi_fits:
        try:
            zeta = zeta_trace(multi_fits, params)
        except FitError as e:
            notes.append(str(e))

    cone = cone_test(curve, r0, settings.cone_window)
    corner = None
    speed = None
    if k >= 2 or not cone.passed:
        try:
            corner = corner_fit(curve, r0, max(k, 2), params, delta=settings.cone_window)
        except FitError as e:
            notes.append(str(e))
    try:
        speed = speed_trace(history, r0, blowup_time, max(k, 1), params)
    except FitError as e:
        notes.append(str(e))

    evidence = Evidence(
        r0=r0,
        sign_constant=sign_constant,
        k=k,
        energy=energy_criterion(trace, ek0, c3, k),
        cone=cone,
        slope=slope_match(single_fits[-1], curve, r0),
        rate=convergence_rate(single_fits, settings.r2_threshold),
        corner=corner,
        speed=speed,
        slope_tolerance=settings.slope_tolerance,
    )
    return ProbeResult(
        r0=r0,
        classification=classify(evidence),
        trace=trace,
        single_fits=single_fits,
        multi_fits=multi_fits,
        selection=selection,
        zeta=zeta,
        corner=corner,
        boundedness=bounds,
        notes=tuple(notes),
    )


def _boundedness(
    history: SolutionHistory,
    curve: BlowupCurve,
    r0: float,
    s_values: FloatArray,
    frames: list[SimilarityFrame],
    growth_factor: float,
    y: FloatArray,
    notes: list[str],
) -> BoundednessReport:
    """Boundedness over r ∈ [r₀/2, 3r₀/2], falling back to the probe's own frames."""
    try:
        return boundedness_report(
            history, boundedness_radii(r0), s_values, curve.value_at, growth_factor, y
        )
    except (FrameError, DomainError) as e:
        notes.append(f"boundedness from probe frames only: {e}")
    values = [boundedness_density(frame) for frame in frames]
    return BoundednessReport(
        supremum=float(max(values)),
        first=values[0],
        last=values[-1],
        growth_factor=growth_factor,
        diverging=values[-1] > growth_factor * max(values[0], 1e-300),
        samples=len(values),
    )


# ─── Bundle tables ───────────────────────────────────────────────────

def write_probe_files(
    writer: BundleWriter, probe: ProbeResult, k_max: int, curve: BlowupCurve
) -> None:
    tag = probe_tag(probe.r0)
    if probe.trace is not None:
        report = probe.trace.report
        writer.csv(
            f"{TRACES_DIR}/trace_{tag}.csv",
            probe.trace.to_rows(),
            TRACE_FIELDS,
            comments=[
                f"r0 = {probe.r0:.17g}",
                f"gamma = {probe.trace.gamma:.17g}",
                f"h_nonincreasing = {str(report.h_nonincreasing).lower()}",
                f"inequality_holds = {str(report.inequality_holds).lower()}",
            ],
        )
    if probe.single_fits:
        writer.csv(
            f"{FITS_DIR}/fits_{tag}.csv",
            fit_rows(probe, k_max),
            fit_fields(k_max),
            comments=[
                f"r0 = {probe.r0:.17g}",
                f"k = {probe.selection.k if probe.selection else ''}",
                f"k_accepted = {str(probe.selection.accepted).lower() if probe.selection else ''}",
            ],
        )
    if probe.corner is not None:
        writer.csv(
            f"{CORNER_DIR}/corner_{tag}.csv",
            corner_rows(curve, probe.r0),
            CORNER_FIELDS,
            comments=[
                f"r0 = {probe.r0:.17g}",
                f"beta_left = {probe.corner.beta_left:.17g}",
                f"beta_right = {probe.corner.beta_right:.17g}",
                f"beta_predicted = {probe.corner.beta_predicted:.17g}",
            ],
        )


def fit_rows(probe: ProbeResult, k_max: int) -> list[dict[str, str]]:
    multi = {fit.s: fit for fit in probe.multi_fits}
    rows = []
    for single in probe.single_fits:
        row = {
            "s": f"{single.s:.17g}",
            "theta": str(single.theta),
            "d": f"{single.d:.17g}",
            "single_residual": f"{single.residual:.17g}",
            "single_converged": str(single.converged).lower(),
        }
        fit = multi.get(single.s)
        if fit is not None:
            multi_row = fit.to_row(k_max)
            multi_row.pop("s")
            row.update(multi_row)
        rows.append(row)
    return rows


def _curve_comments(config: RunConfig, curve: BlowupCurve | None) -> list[str]:
    comments = [
        f"scenario = {config.name}",
        f"p = {config.params.p:.17g}",
        f"N = {config.params.N}",
        f"h = {config.scenario.h:.17g}",
    ]
    if curve is None:
        comments.append("no blow-up")
    else:
        comments.append(f"lipschitz_excess = {curve.lipschitz_excess:.17g}")
    return comments


def _classification_document(
    config: RunConfig,
    curve: BlowupCurve | None,
    probes: tuple[ProbeResult, ...],
    checks: Any,
) -> dict[str, Any]:
    details = {}
    for probe in probes:
        details[probe_tag(probe.r0)] = {
            "error": probe.error,
            "notes": list(probe.notes),
            "gamma": probe.trace.gamma if probe.trace else None,
            "monotonicity": probe.trace.report.to_dict() if probe.trace else None,
            "boundedness": probe.boundedness.to_dict() if probe.boundedness else None,
            "k_residuals": list(probe.selection.residuals) if probe.selection else None,
            "k_accepted": probe.selection.accepted if probe.selection else None,
            "frame_norm": probe.selection.frame_norm if probe.selection else None,
            "zeta": probe.zeta.to_dict() if probe.zeta else None,
        }
    return {
        "scenario": config.name,
        "blow_up": curve is not None,
        "lipschitz_ok": curve.lipschitz_ok if curve is not None else None,
        "points": [p.classification.to_dict() for p in probes if p.classification is not None],
        "global_checks": checks.to_dict() if checks is not None else None,
        "probes": details,
    }


def _summary(
    curve: BlowupCurve | None, probes: tuple[ProbeResult, ...], history: SolutionHistory
) -> dict[str, Any]:
    verdicts: dict[str, int] = {v.value: 0 for v in Verdict}
    for probe in probes:
        if probe.classification is not None:
            verdicts[probe.classification.verdict.value] += 1
    return {
        "blow_up": curve is not None,
        "stop_reason": history.stop_reason,
        "final_time": history.final_time,
        "verdicts": verdicts,
    }


def _seeded_options(config: RunConfig) -> dict[str, Any]:
    """Generator options with the run seed filled into a noise block that has none."""
    options = dict(config.scenario.generator_params)
    noise = options.get("noise")
    if isinstance(noise, dict) and "seed" not in noise:
        options["noise"] = {**noise, "seed": config.seed}
    return options


# ─── Sweeps ──────────────────────────────────────────────────────────

def run_sweep(
    config: RunConfig, output_root: Path | None = None, workers: int | None = None
) -> SweepResult:
    """Run the configured ε-sweep.

    ``trapping`` perturbs a self-similar seed by ε and checks that the drift
    |argth d_fit − argth d*| at the probe grows at most linearly in ε.
    ``stability`` adds an ε-bump to the data and checks that a characteristic
    candidate survives every member.

    Raises:
        PipelineError: If the config has no sweep or the sweep does not fit the generator.
    """
    sweep = config.sweep
    if sweep is None:
        raise PipelineError("sweep", f"config '{config.name}' declares no sweep")
    if sweep.kind == "trapping":
        result = run_trapping_sweep(config, sweep.epsilons, output_root, workers)
    else:
        result = run_stability_sweep(config, sweep.epsilons, output_root, workers)
    return result


def _member(config: RunConfig, suffix: str, options: dict[str, Any]) -> RunConfig:
    scenario = replace(config.scenario, generator_params=options)
    return replace(config, name=f"{config.name}-{suffix}", scenario=scenario, sweep=None)


def run_trapping_sweep(
    config: RunConfig,
    epsilons: tuple[float, ...],
    output_root: Path | None = None,
    workers: int | None = None,
) -> SweepResult:
    if config.scenario.generator != "selfsimilar-perturbed":
        raise PipelineError("sweep", "trapping needs the selfsimilar-perturbed generator")
    if any(eps <= 0.0 for eps in epsilons):
        raise PipelineError("sweep", "trapping epsilons must be > 0")
    options = dict(config.scenario.generator_params)
    d_star = float(options.get("d", 0.0))
    r0 = float(options.get("r0", 1.0))
    if config.sweep is not None and config.sweep.r0 is not None:
        r0 = config.sweep.r0

    started = time.perf_counter()
    points: list[SweepPoint] = []
    for eps in sorted(epsilons):
        member = _member(config, f"eps{eps:g}", {**options, "epsilon": eps})
        print(f"🔁 Trapping member ε={eps:g}")
        try:
            history = BlowupPipeline(member, output_root, workers).solve()
            curve = blowup_curve(history)
            probe = analyze_probe(member, history, curve, r0)
            d_fit = probe.single_fits[-1].d
            points.append(
                SweepPoint(
                    epsilon=eps,
                    blowup_time=curve.value_at(r0),
                    d_fit=d_fit,
                    drift=abs(math.atanh(d_fit) - math.atanh(d_star)),
                )
            )
        except BlowupLabError as e:
            points.append(_failed_member(eps, e))

    accepted, detail = trapping_verdict(points)
    return _finish_sweep(config, "trapping", points, accepted, detail, output_root, started)


def trapping_verdict(points: list[SweepPoint]) -> tuple[bool, str]:
    """Drift linear in ε: each drift ≤ 2·(drift/ε at the smallest ε)·ε + tolerance."""
    usable = [p for p in points if p.error is None and math.isfinite(p.drift)]
    if len(usable) < 2:
        return False, f"only {len(usable)} usable sweep members"
    base = usable[0].drift / usable[0].epsilon
    worst = max(p.drift - 2.0 * base * p.epsilon for p in usable)
    ok = worst <= TRAPPING_TOLERANCE
    ratios = ", ".join(f"{p.drift / p.epsilon:.3g}" for p in usable)
    return ok, f"drift/eps = [{ratios}]"


def run_stability_sweep(
    config: RunConfig,
    epsilons: tuple[float, ...],
    output_root: Path | None = None,
    workers: int | None = None,
) -> SweepResult:
    options = dict(config.scenario.generator_params)
    base_block = dict(options.get("perturbation") or {})
    center = 0.5 * config.scenario.r_max
    if config.sweep is not None and config.sweep.r0 is not None:
        center = config.sweep.r0
    base_block.setdefault("center", center)
    base_block.setdefault("width", 0.1 * config.scenario.r_max)

    started = time.perf_counter()
    points: list[SweepPoint] = []
    for eps in sorted(epsilons):
        member = _member(
            config, f"eps{eps:g}", {**options, "perturbation": {**base_block, "amplitude": eps}}
        )
        print(f"🔁 Stability member ε={eps:g}")
        try:
            result = BlowupPipeline(member, output_root, workers).run()
            candidates = tuple(
                c.r0
                for c in result.classifications
                if c.verdict is Verdict.CHARACTERISTIC_CANDIDATE
            )
            t_min = float(np.nanmin(result.curve.T)) if result.curve is not None else math.nan
            points.append(
                SweepPoint(
                    epsilon=eps, blowup_time=t_min, d_fit=math.nan, drift=math.nan,
                    candidates=candidates,
                )
            )
        except BlowupLabError as e:
            points.append(_failed_member(eps, e))

    survived = [p for p in points if p.candidates]
    accepted = len(survived) == len(points) and bool(points)
    detail = "; ".join(
        f"eps={p.epsilon:g}: {', '.join(f'{c:g}' for c in p.candidates) or 'none'}" for p in points
    )
    return _finish_sweep(config, "stability", points, accepted, detail, output_root, started)


def _finish_sweep(
    config: RunConfig,
    kind: str,
    points: list[SweepPoint],
    accepted: bool,
    detail: str,
    output_root: Path | None,
    started: float,
) -> SweepResult:
    bundle_dir = get_bundle_dir(f"{config.name}-{kind}", output_root or config.output_dir)
    writer = BundleWriter(bundle_dir)
    writer.csv(
        SWEEP_FILE,
        [p.to_row() for p in points],
        SWEEP_FIELDS,
        comments=[f"sweep = {kind}", f"accepted = {str(accepted).lower()}", detail],
    )
    errors = [{"stage": f"eps {p.epsilon:g}", "reason": p.error} for p in points if p.error]
    elapsed = time.perf_counter() - started
    writer.manifest(config.to_dict(), __version__, elapsed, errors, {"accepted": accepted})
    return SweepResult(
        kind=kind, points=tuple(points), accepted=accepted, detail=detail, bundle_dir=bundle_dir
    )


def _failed_member(epsilon: float, error: BlowupLabError) -> SweepPoint:
    return SweepPoint(
        epsilon=epsilon, blowup_time=math.nan, d_fit=math.nan, drift=math.nan, error=str(error)
    )
