"""Evidence tests and the characteristic / non-characteristic verdict.

Every test here is a pure function of already computed artifacts (traces,
fits, curves, histories). ``classify`` combines their outcomes with a fixed
rule so that identical evidence always yields the identical verdict.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
from scipy.signal import find_peaks
from scipy.stats import linregress

from blowuplab.exceptions import FitError
from blowuplab.models import (
    BlowupCurve,
    ConeTest,
    ConvergenceRate,
    CornerFit,
    EnergyCriterion,
    Evidence,
    FloatArray,
    GlobalChecks,
    LyapunovTrace,
    Outcome,
    Params,
    PointClassification,
    SlopeMatch,
    SolitonFit,
    SolutionHistory,
    SpeedTrace,
    Verdict,
)
from blowuplab.solver import check_forward_light_cone

logger = logging.getLogger(__name__)

CONE_DELTAS = np.linspace(0.05, 0.95, 19)
MIN_RATE_SAMPLES = 6
MIN_CORNER_POINTS = 8
MIN_SECANT_POINTS = 6
CORNER_NEAR_CELLS = 4
CORNER_SECANT = 0.5
CORNER_GROWTH = 0.05
PEAK_PROMINENCE_CELLS = 4.0
MIN_SPEED_SAMPLES = 4
ZERO_ENERGY = 1.0e-12
TINY_RESIDUAL = 1.0e-13
CORNER_FLOOR = 1.0e-9


# ─── Energy ──────────────────────────────────────────────────────────

def energy_gap_constant(trace: LyapunovTrace) -> float:
    """sup over the trace of e^{s}|E(s) − H(s)|.

    E and the Lyapunov functional H differ by terms of order e^{−s}; this is
    the measured constant in front of that order.
    """
    if len(trace) == 0:
        return 0.0
    gap = np.exp(trace.s) * np.abs(trace.E - trace.H)
    finite = gap[np.isfinite(gap)]
    return float(np.max(finite, initial=0.0))


def energy_criterion(
    trace: LyapunovTrace,
    ek0: float,
    c3: float = 0.0,
    k: int | None = None,
) -> EnergyCriterion:
    """Compare late-s energies with 2E(κ₀) up to the margin c3·e^{−s}.

    PASS when some late E(s) lies below 2E(κ₀) − c3e^{−s}; FAIL when the last
    energy exceeds 2E(κ₀) + c3e^{−s}; otherwise UNDETERMINED. A trace that
    is identically zero is NOT_APPLICABLE.
    """
    c3 = max(float(c3), 0.0) if math.isfinite(c3) else 0.0
    if len(trace) < 2:
        return EnergyCriterion(outcome=Outcome.UNDETERMINED, c3=c3)
    if np.all(np.abs(trace.E) <= ZERO_ENERGY):
        return EnergyCriterion(outcome=Outcome.NOT_APPLICABLE, last_energy=0.0, c3=c3)

    late = slice(len(trace) // 2, None)
    s_late = trace.s[late]
    e_late = trace.E[late]
    margins = c3 * np.exp(-s_late)
    margin = float(margins[-1])
    last = float(e_late[-1])

    if np.any(e_late < 2.0 * ek0 - margins):
        outcome = Outcome.PASS
    elif last > 2.0 * ek0 + margin:
        outcome = Outcome.FAIL
    else:
        outcome = Outcome.UNDETERMINED

    lower_ok = None if k is None else bool(last >= k * ek0 - margin)
    return EnergyCriterion(
        outcome=outcome,
        margin=margin,
        last_energy=last,
        threshold=2.0 * ek0 - margin,
        lower_bound_ok=lower_ok,
        c3=c3,
    )


# ─── Curve geometry ──────────────────────────────────────────────────

def secant_profile(
    curve: BlowupCurve, r0: float, window: float = 0.2
) -> tuple[FloatArray, FloatArray]:
    """Gaps g = h, 2h, … up to the window and S(g) = (2T(r₀) − T(r₀ − g) − T(r₀ + g))/g.

    S tends to 0 at a point where T is differentiable and to 2 at a corner
    whose one-sided slopes reach ±1.
    """
    gaps = curve.h * np.arange(1, int(window / curve.h + 1e-9) + 1)
    gaps = gaps[(r0 - gaps >= curve.r[0]) & (r0 + gaps <= curve.r[-1])]
    t0 = curve.value_at(r0)
    secants = (
        2.0 * t0 - np.interp(r0 - gaps, curve.r, curve.T) - np.interp(r0 + gaps, curve.r, curve.T)
    ) / gaps
    keep = np.isfinite(secants)
    return gaps[keep], secants[keep]


def _corner_signature(curve: BlowupCurve, r0: float, window: float) -> tuple[bool, float]:
    gaps, secants = secant_profile(curve, r0, window)
    if gaps.size < MIN_SECANT_POINTS:
        return False, math.nan
    near = float(np.max(secants[gaps <= CORNER_NEAR_CELLS * curve.h + 1e-12]))
    half = gaps.size // 2
    growth = float(np.median(secants[:half])) - float(np.median(secants[half:]))
    return near >= CORNER_SECANT and growth >= CORNER_GROWTH, near


def cone_test(
    curve: BlowupCurve,
    r0: float,
    window: float = 0.2,
    tolerance: float | None = None,
) -> ConeTest:
    """Smallest δ₀ on the test grid with T(r) ≥ T(r₀) − δ₀|r − r₀| in the window.

    The comparison allows ``tolerance`` (default h/2) of slack. A point with
    samples on one side only is tested on that side and flagged one-sided.
    A corner signature in the secant profile fails the test regardless of δ₀:
    the one-sided slopes are still climbing toward ±1 below the resolution.
    """
    tol = 0.5 * curve.h if tolerance is None else tolerance
    distance = curve.r - r0
    near = (np.abs(distance) <= window) & (np.abs(distance) > 0.0) & np.isfinite(curve.T)
    left = bool(np.any(near & (distance < 0.0)))
    right = bool(np.any(near & (distance > 0.0)))
    one_sided = not (left and right)
    if not (left or right):
        return ConeTest(passed=False, delta0=None, one_sided=True, window=window)

    corner, secant = (False, math.nan) if one_sided else _corner_signature(curve, r0, window)
    t0 = curve.value_at(r0)
    gaps = np.abs(distance[near])
    values = curve.T[near]
    delta0 = None
    for delta in CONE_DELTAS:
        if np.all(values >= t0 - delta * gaps - tol):
            delta0 = float(delta)
            break
    if corner:
        logger.debug("r0=%g: corner signature, secant slope %.3g", r0, secant)
    return ConeTest(
        passed=delta0 is not None and not corner,
        delta0=delta0,
        one_sided=one_sided,
        window=window,
        corner=corner,
        secant=secant,
    )


def local_maxima(curve: BlowupCurve, prominence: float | None = None) -> tuple[float, ...]:
    """Radii of interior local maxima of T(r) on each contiguous run of samples.

    Peaks need a prominence of at least ``prominence`` (default
    PEAK_PROMINENCE_CELLS·h), which drops the ripple of flat stretches.
    """
    if prominence is None:
        prominence = PEAK_PROMINENCE_CELLS * curve.h
    breaks = np.flatnonzero(np.diff(curve.r) > 1.5 * curve.h) + 1
    found: list[float] = []
    for segment in np.split(np.arange(curve.r.size), breaks):
        values = curve.T[segment]
        if values.size < 3 or not np.all(np.isfinite(values)):
            continue
        peaks, _ = find_peaks(values, prominence=prominence)
        found.extend(float(curve.r[segment[i]]) for i in peaks)
    return tuple(found)


def slope_match(fit: SolitonFit, curve: BlowupCurve, r0: float) -> SlopeMatch:
    """|argth d_fit − argth T′(r₀)|, not applicable for |T′(r₀)| ≥ 1 or a failed fit."""
    slope = curve.slope_at(r0)
    if not math.isfinite(slope) or abs(slope) >= 1.0 or not fit.converged:
        return SlopeMatch(applicable=False)
    return SlopeMatch(applicable=True, mismatch=abs(fit.xi - math.atanh(slope)))


def convergence_rate(
    fits: Sequence[SolitonFit],
    r2_threshold: float = 0.9,
    min_samples: int = MIN_RATE_SAMPLES,
) -> ConvergenceRate:
    """Fit log residual = c − μs over converged fits."""
    usable = [
        f for f in fits if f.converged and math.isfinite(f.s) and f.residual > TINY_RESIDUAL
    ]
    if len(usable) < min_samples:
        return ConvergenceRate(
            mu=math.nan, r_squared=math.nan, decaying=False, samples=len(usable)
        )
    usable.sort(key=lambda f: f.s)
    result = linregress([f.s for f in usable], np.log([f.residual for f in usable]))
    mu = -float(result.slope)
    r_squared = float(result.rvalue) ** 2
    return ConvergenceRate(
        mu=mu,
        r_squared=r_squared,
        decaying=mu > 0.0 and r_squared >= r2_threshold,
        samples=len(usable),
    )


def _log_fit(
    gaps: FloatArray, values: FloatArray, min_points: int
) -> tuple[float, float, float] | None:
    """Fit values ≈ C/|log gap|^β; returns (β, C, stderr) or None."""
    keep = values > CORNER_FLOOR
    if int(np.count_nonzero(keep)) < min_points:
        return None
    x = np.log(np.abs(np.log(gaps[keep])))
    result = linregress(x, np.log(values[keep]))
    return -float(result.slope), float(np.exp(result.intercept)), float(result.stderr)


def corner_fit(
    curve: BlowupCurve,
    r0: float,
    k: int,
    params: Params,
    delta: float = 0.2,
    min_points: int = MIN_CORNER_POINTS,
) -> CornerFit:
    """Logarithmic corner exponents on both sides of a candidate point.

    The primary estimate uses the curve itself:
    (T − T(r₀) + |r − r₀|)/|r − r₀| ≈ C/|log|r − r₀||^β. The secondary one
    uses the slopes: sign(r − r₀)(T′ + sign(r − r₀)) ≈ C/|log|r − r₀||^β.
    The prediction is β = (k − 1)(p − 1)/2. When too few samples stay above
    the straight cone the fit is degenerate.

    Raises:
        FitError: If a side has fewer than ``min_points`` samples in the window.
    """
    t0 = curve.value_at(r0)
    distance = curve.r - r0
    gaps_all = np.abs(distance)
    usable = (gaps_all > 0.0) & (gaps_all <= delta) & (gaps_all < 1.0) & np.isfinite(curve.T)
    results: dict[str, tuple[float, float, float] | None] = {}
    derivative: dict[str, float] = {}
    sides = (("left", usable & (distance < 0.0)), ("right", usable & (distance > 0.0)))
    for side, mask in sides:
        count = int(np.count_nonzero(mask))
        if count < min_points:
            raise FitError(
                f"corner fit at r0={r0:g} needs {min_points} samples on the {side}, got {count}"
            )
        gaps = gaps_all[mask]
        sign = np.sign(distance[mask])
        results[side] = _log_fit(gaps, (curve.T[mask] - t0 + gaps) / gaps, min_points)
        slope_fit = _log_fit(gaps, sign * (curve.dT[mask] + sign), min_points)
        derivative[side] = slope_fit[0] if slope_fit else math.nan

    predicted = (k - 1) * (params.p - 1.0) / 2.0
    left, right = results["left"], results["right"]
    if left is None or right is None:
        return CornerFit(
            beta_left=left[0] if left else math.nan,
            beta_right=right[0] if right else math.nan,
            beta_predicted=predicted,
            c_left=left[1] if left else 0.0,
            c_right=right[1] if right else 0.0,
            beta_left_derivative=derivative["left"],
            beta_right_derivative=derivative["right"],
            stderr=math.nan,
            degenerate=True,
        )
    return CornerFit(
        beta_left=left[0],
        beta_right=right[0],
        beta_predicted=predicted,
        c_left=left[1],
        c_right=right[1],
        beta_left_derivative=derivative["left"],
        beta_right_derivative=derivative["right"],
        stderr=math.hypot(left[2], right[2]) / 2.0,
        degenerate=False,
    )


def corner_rows(curve: BlowupCurve, r0: float, delta: float = 0.2) -> list[dict[str, str]]:
    """Near-field samples used by the corner fit, for export."""
    t0 = curve.value_at(r0)
    rows = []
    for r, T, dT in zip(curve.r, curve.T, curve.dT):
        gap = abs(r - r0)
        if 0.0 < gap <= delta and gap < 1.0 and math.isfinite(T):
            side = math.copysign(1.0, r - r0)
            rows.append(
                {
                    "r": f"{r:.17g}",
                    "gap": f"{gap:.17g}",
                    "log_log_gap": f"{math.log(abs(math.log(gap))):.17g}",
                    "excess": f"{(T - t0 + gap) / gap:.17g}",
                    "slope_excess": f"{side * (dT + side):.17g}",
                }
            )
    return rows


# ─── Blow-up speed ───────────────────────────────────────────────────

def speed_trace(
    history: SolutionHistory,
    r0: float,
    blowup_time: float,
    k: int,
    params: Params,
    min_samples: int = MIN_SPEED_SAMPLES,
) -> SpeedTrace:
    """Regress log(sup|u|·(T−t)^{2/(p−1)}) on log|log(T−t)| inside the backward cone.

    Samples are snapshots with T − t < e^{−1} whose cone |r − r₀| < T − t lies
    inside the grid and holds no dead node. The predicted slope is (k − 1)/2.

    Raises:
        FitError: If fewer than ``min_samples`` snapshots qualify.
    """
    xs: list[float] = []
    ys: list[float] = []
    left_the_grid = False
    for row, t in enumerate(history.times):
        remaining = blowup_time - float(t)
        if not 0.0 < remaining < math.exp(-1.0):
            continue
        if r0 + remaining > history.r[-1]:
            left_the_grid = True
            continue
        cone = np.abs(history.r - r0) < remaining
        if not np.any(cone):
            continue
        values = history.u[row, cone]
        if not np.all(np.isfinite(values)):
            continue
        sup = float(np.max(np.abs(values)))
        if sup <= 0.0:
            continue
        xs.append(math.log(abs(math.log(remaining))))
        ys.append(math.log(sup * remaining**params.alpha))

    if len(xs) < min_samples:
        reason = "backward cone leaves the grid" if left_the_grid else "too few cone samples"
        raise FitError(f"speed trace at r0={r0:g}: {reason} ({len(xs)} usable)")
    result = linregress(xs, ys)
    return SpeedTrace(
        slope=float(result.slope),
        predicted=(k - 1) / 2.0,
        intercept=float(result.intercept),
        r_squared=float(result.rvalue) ** 2,
        samples=len(xs),
    )


# ─── Aggregation ─────────────────────────────────────────────────────

def passed_tests(evidence: Evidence) -> tuple[str, ...]:
    passed = []
    if evidence.energy is not None and evidence.energy.outcome is Outcome.PASS:
        passed.append("energy")
    if evidence.cone is not None and evidence.cone.passed:
        passed.append("cone")
    if (
        evidence.slope is not None
        and evidence.slope.applicable
        and evidence.slope.mismatch <= evidence.slope_tolerance
    ):
        passed.append("slope")
    return tuple(passed)


def classify(evidence: Evidence) -> PointClassification:
    """Deterministic verdict for one point.

    Order of rules: constant sign in the cone forces non-characteristic; the
    axis is undetermined; a passing energy criterion, or a passing cone test
    together with a matching slope, gives non-characteristic; a failed cone
    test with k ≥ 2 gives a characteristic candidate; anything else is
    undetermined.
    """
    passed = passed_tests(evidence)
    if evidence.sign_constant:
        verdict = Verdict.NON_CHARACTERISTIC
        passed = ("sign",) + passed
    elif evidence.on_axis:
        verdict = Verdict.UNDETERMINED
    elif "energy" in passed or {"cone", "slope"} <= set(passed):
        verdict = Verdict.NON_CHARACTERISTIC
    elif (
        evidence.cone is not None
        and not evidence.cone.passed
        and evidence.k is not None
        and evidence.k >= 2
    ):
        verdict = Verdict.CHARACTERISTIC_CANDIDATE
    else:
        verdict = Verdict.UNDETERMINED
    logger.debug("r0=%g: %s (passed %s)", evidence.r0, verdict.value, ", ".join(passed) or "none")
    return PointClassification(
        r0=evidence.r0, verdict=verdict, k=evidence.k, evidence=evidence, passed_tests=passed
    )


def global_checks(
    classifications: Sequence[PointClassification],
    curve: BlowupCurve | None,
    r_tol: float | None = None,
) -> GlobalChecks:
    """Openness, isolation and the forward light cone across one scenario.

    Probes are ordered in r and neighbours are consecutive probes; the axis
    is left out of the first two checks. At probe resolution a
    non-characteristic point next to a candidate is not inside an open set,
    and two adjacent candidates are not isolated.
    """
    ordered = sorted((c for c in classifications if c.r0 > 0.0), key=lambda c: c.r0)
    violations: list[str] = []
    candidate = Verdict.CHARACTERISTIC_CANDIDATE

    open_set = True
    for index, current in enumerate(ordered):
        if current.verdict is not Verdict.NON_CHARACTERISTIC:
            continue
        beside = [
            ordered[j].r0
            for j in (index - 1, index + 1)
            if 0 <= j < len(ordered) and ordered[j].verdict is candidate
        ]
        if beside:
            open_set = False
            where = ", ".join(f"{r0:g}" for r0 in beside)
            violations.append(f"non-characteristic r0={current.r0:g} next to candidate r0={where}")

    isolated = True
    for current, after in zip(ordered, ordered[1:]):
        if current.verdict is candidate and after.verdict is candidate:
            isolated = False
            violations.append(f"adjacent candidates at r0={current.r0:g} and r0={after.r0:g}")

    light_cone = check_forward_light_cone(curve, r_tol) if curve is not None else None
    if light_cone is False:
        violations.append("T(r) >= T(0) + r somewhere away from the axis")
    for message in violations:
        logger.warning("global check: %s", message)
    return GlobalChecks(
        open_set=open_set,
        isolated_candidates=isolated,
        forward_light_cone=light_cone,
        violations=tuple(violations),
    )
