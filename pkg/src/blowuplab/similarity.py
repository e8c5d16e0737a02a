"""Similarity frames w_{r₀}(y, s) extracted from solver histories, and their diagnostics.

For a center r₀ with blow-up time T₀ the frame at similarity time s samples

    w(y, s)  = e^{−αs} u(r, t)
    ∂ᵧw      = e^{−(α+1)s} ∂ᵣu
    ∂ₛw      = −αw + e^{−(α+1)s}(∂ₜu − y ∂ᵣu)

at r = r₀ + y e^{−s}, t = T₀ − e^{−s}, with α = 2/(p−1). The recorded fields
are interpolated bilinearly in (r, t); ∂ₛw always comes from the chain rule,
never from differencing frames.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np

from blowuplab.exceptions import DomainError, FrameError
from blowuplab.functionals import (
    abs_power,
    boundedness_density,
    dissipation,
    energy_E,
    functional_F,
    integrate,
    lyapunov_factor,
    rho_weight,
    similarity_grid,
    similarity_operator,
)
from blowuplab.models import (
    BoundednessReport,
    FloatArray,
    LyapunovTrace,
    MonotonicityReport,
    SimilarityFrame,
    SolutionHistory,
)

logger = logging.getLogger(__name__)

MONOTONICITY_RTOL = 1.0e-2
GAMMA_MAX = 100.0
GAMMA_BISECTIONS = 50


# ─── Frames ──────────────────────────────────────────────────────────

def _row_at(history: SolutionHistory, k: int, r: FloatArray) -> tuple[FloatArray, ...]:
    return tuple(
        np.interp(r, history.r, field[k]) for field in (history.u, history.v, history.ur)
    )


def to_similarity_frame(
    history: SolutionHistory,
    r0: float,
    s: float,
    blowup_time: float,
    y: FloatArray | None = None,
    weights: FloatArray | None = None,
) -> SimilarityFrame:
    """Transform recorded (u, ∂ₜu, ∂ᵣu) into the similarity frame at (r₀, s).

    Raises:
        FrameError: If e^{−s} > min(T₀, r₀/2), if the frame time or radii fall
            outside the recorded data, or if the frame touches dead nodes.
    """
    if y is None:
        y = similarity_grid()
    params = history.params
    alpha = params.alpha
    scale = math.exp(-s)
    if r0 <= 0.0:
        raise FrameError(r0, s, "center must be away from the axis")
    if scale > min(blowup_time, r0 / 2.0) * (1.0 + 1e-12):
        raise FrameError(r0, s, f"e^-s = {scale:.4g} exceeds min(T, r0/2)")

    t = blowup_time - scale
    times = history.times
    if t < times[0] or t > times[-1]:
        raise FrameError(
            r0, s, f"frame time {t:.6g} outside recorded [{times[0]:.6g}, {times[-1]:.6g}]"
        )
    r = r0 + y * scale
    if r[0] < history.r[0] or r[-1] > history.r[-1]:
        raise FrameError(r0, s, "frame radii leave the radial grid")

    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2))
    theta = (t - times[k]) / (times[k + 1] - times[k])
    lower = _row_at(history, k, r)
    upper = _row_at(history, k + 1, r)
    if theta == 0.0:
        u, ut, ur = lower
    else:
        u, ut, ur = ((1.0 - theta) * b + theta * a for b, a in zip(lower, upper))
    # a node dead at either bracketing snapshot leaves its samples NaN
    dead = ~(np.isfinite(u) & np.isfinite(ut) & np.isfinite(ur))
    if np.any(dead):
        raise FrameError(
            r0,
            s,
            f"{int(np.count_nonzero(dead))} samples touch nodes dead by t={times[k + 1]:.6g}",
        )

    w = math.exp(-alpha * s) * u
    wy = math.exp(-(alpha + 1.0) * s) * ur
    ws = -alpha * w + math.exp(-(alpha + 1.0) * s) * (ut - y * ur)
    return SimilarityFrame(
        params=params, r0=r0, s=s, y=np.asarray(y, dtype=float), w=w, ws=ws, wy=wy,
        weights=weights,
    )


def frame_s_range(
    blowup_time: float,
    r0: float,
    gap: float,
    h: float,
    count: int,
    start_offset: float = 1.0,
    end_offset: float = 1.0,
    min_frame_cells: int = 8,
) -> FloatArray:
    """Evenly spaced similarity times kept inside trusted data.

    Starts at −log T₀ + start_offset (and no earlier than the cone range allows)
    and ends at −log(gap) − end_offset, capped so each frame spans at least
    ``min_frame_cells`` grid cells. Returns an empty array when the range is empty.
    """
    start = max(-math.log(blowup_time) + start_offset, -math.log(min(blowup_time, r0 / 2.0)))
    end = min(-math.log(max(gap, 1e-300)) - end_offset, -math.log(min_frame_cells * h))
    if not end > start or count < 1:
        return np.empty(0)
    if count == 1:
        return np.array([end])
    return np.linspace(start, end, count)


# ─── Similarity equation residual ────────────────────────────────────

def _weighted_norm(values: FloatArray, y: FloatArray, frame: SimilarityFrame) -> float:
    rho = np.asarray(rho_weight(y, frame.params))
    return math.sqrt(max(integrate(values**2 * rho, y), 0.0))


def eqw_residual(
    frames: Sequence[SimilarityFrame],
    include_radial_term: bool = True,
) -> float:
    """ρ-weighted norm of ∂²ₛw minus the right-hand side of the similarity equation.

    Takes three frames at s − Δs, s, s + Δs. ∂²ₛw is the central difference of the
    chain-rule ∂ₛw; y-derivatives are central differences on interior nodes.

    Raises:
        DomainError: If the frames do not share a grid, a center, or a uniform Δs.
    """
    if len(frames) != 3:
        raise DomainError("eqw_residual", "needs exactly three consecutive frames")
    before, mid, after = frames
    for other in (before, after):
        if other.y.shape != mid.y.shape or not np.allclose(other.y, mid.y):
            raise DomainError("eqw_residual", "frames do not share the same grid")
        if other.r0 != mid.r0:
            raise DomainError("eqw_residual", "frames do not share the same center")
    ds = mid.s - before.s
    if not ds > 0.0 or not math.isclose(after.s - mid.s, ds, rel_tol=1e-6):
        raise DomainError("eqw_residual", "frames must be equally spaced in s")

    params = mid.params
    y = mid.y
    dy = y[1] - y[0]
    inner = y[1:-1]
    w = mid.w[1:-1]
    wy = mid.wy[1:-1]
    wss = (after.ws - before.ws)[1:-1] / (2.0 * ds)
    wyy = (mid.wy[2:] - mid.wy[:-2]) / (2.0 * dy)
    wys = (mid.ws[2:] - mid.ws[:-2]) / (2.0 * dy)
    ws = mid.ws[1:-1]

    rhs = (
        similarity_operator(wyy, wy, inner, params)
        - params.mass_coeff * w
        + abs_power(w, params.p - 1.0) * w
        - (params.p + 3.0) / (params.p - 1.0) * ws
        - 2.0 * inner * wys
    )
    if include_radial_term:
        scale = math.exp(-mid.s)
        rhs = rhs + scale * (params.N - 1) / (mid.r0 + inner * scale) * wy
    return _weighted_norm(wss - rhs, inner, mid)


def radial_term_bound(frame: SimilarityFrame) -> float:
    """(2/r₀)(N−1)e^{−s}‖∂ᵧw‖ on interior nodes, the size of the dropped radial term."""
    inner = frame.y[1:-1]
    norm = _weighted_norm(frame.wy[1:-1], inner, frame)
    return 2.0 / frame.r0 * (frame.params.N - 1) * math.exp(-frame.s) * norm


# ─── Lyapunov functionals ────────────────────────────────────────────

def inequality_gamma(
    s: FloatArray,
    F: FloatArray,
    dFds: FloatArray,
    dissipation_values: FloatArray,
    p: float,
    tolerance: float = 0.0,
) -> float:
    """Smallest γ ≥ 0 with dF/ds ≤ γe^{−s}F − (2/(p−1))·dissipation + tolerance everywhere.

    Returns ``inf`` when no finite γ works.
    """
    lhs = dFds + 2.0 / (p - 1.0) * dissipation_values - tolerance
    coeff = np.exp(-s) * F
    gamma = 0.0
    for need, c in zip(lhs, coeff):
        if need <= 0.0:
            continue
        if c <= 0.0:
            return math.inf
        gamma = max(gamma, float(need / c))
    return gamma


def _h_values(s: FloatArray, F: FloatArray, gamma: float) -> FloatArray:
    return F * np.array([lyapunov_factor(gamma, float(value)) for value in s])


def fit_gamma(
    s: FloatArray,
    F: FloatArray,
    dFds: FloatArray,
    dissipation_values: FloatArray,
    p: float,
    gamma_max: float = GAMMA_MAX,
) -> float:
    """Smallest γ in [0, gamma_max] for which the whole monotonicity report passes.

    Both the differential inequality and the non-increase of H are checked.
    The answer is bracketed by bisection to GAMMA_BISECTIONS halvings; ``inf``
    means not even ``gamma_max`` passes.
    """

    def passes(gamma: float) -> bool:
        report = _monotonicity_report(
            s, F, _h_values(s, F, gamma), dFds, dissipation_values, gamma, p
        )
        return report.h_nonincreasing and report.inequality_holds

    if passes(0.0):
        return 0.0
    if not passes(gamma_max):
        return math.inf
    low, high = 0.0, gamma_max
    for _ in range(GAMMA_BISECTIONS):
        middle = 0.5 * (low + high)
        if passes(middle):
            high = middle
        else:
            low = middle
    return high


def _monotonicity_report(
    s: FloatArray,
    F: FloatArray,
    H: FloatArray,
    dFds: FloatArray,
    dissipation_values: FloatArray,
    gamma: float,
    p: float,
) -> MonotonicityReport:
    tolerance = MONOTONICITY_RTOL * max(1.0, abs(float(H[0])) if H.size else 1.0)
    increases = np.diff(H) if H.size > 1 else np.empty(0)
    h_bad = increases > tolerance
    slack = dFds - (gamma * np.exp(-s) * F - 2.0 / (p - 1.0) * dissipation_values)
    largest = float(np.max(np.abs(dissipation_values), initial=0.0))
    ineq_tol = MONOTONICITY_RTOL * (max(1.0, abs(float(F[0])) if F.size else 1.0) + largest)
    ineq_bad = slack > ineq_tol

    half = s.size // 2
    early = int(np.count_nonzero(h_bad[:max(half - 1, 0)])) + int(np.count_nonzero(ineq_bad[:half]))
    late = int(np.count_nonzero(h_bad[max(half - 1, 0):])) + int(np.count_nonzero(ineq_bad[half:]))
    return MonotonicityReport(
        h_nonincreasing=not bool(np.any(h_bad)),
        inequality_holds=not bool(np.any(ineq_bad)),
        max_h_increase=float(np.max(increases, initial=0.0)),
        max_inequality_violation=float(np.max(slack, initial=-math.inf)),
        tolerance=tolerance,
        early_violations=early,
        late_violations=late,
    )


def trace_from_frames(
    frames: Sequence[SimilarityFrame], gamma: float | None = None
) -> LyapunovTrace:
    """Lyapunov trace over frames sorted by s; γ is fitted when not given."""
    if not frames:
        raise DomainError("lyapunov_trace", "no frames in the requested s-range")
    params = frames[0].params
    s = np.array([f.s for f in frames])
    E = np.array([energy_E(f) for f in frames])
    F = np.array([functional_F(f) for f in frames])
    D = np.array([dissipation(f) for f in frames])
    w_norm = np.array([_weighted_norm(f.w, f.y, f) for f in frames])
    ws_norm = np.array([_weighted_norm(f.ws, f.y, f) for f in frames])
    dFds = np.gradient(F, s) if s.size > 1 else np.zeros_like(F)

    if gamma is None:
        gamma = fit_gamma(s, F, dFds, D, params.p)
        if not math.isfinite(gamma):
            tolerance = MONOTONICITY_RTOL * max(1.0, abs(float(F[0])))
            fallback = inequality_gamma(s, F, dFds, D, params.p, tolerance)
            gamma = fallback if math.isfinite(fallback) else 0.0
            logger.warning(
                "r0=%g: no gamma up to %g makes the trace monotone; using %g",
                frames[0].r0,
                GAMMA_MAX,
                gamma,
            )
    H = _h_values(s, F, gamma)
    report = _monotonicity_report(s, F, H, dFds, D, gamma, params.p)
    return LyapunovTrace(
        r0=frames[0].r0,
        gamma=gamma,
        s=s,
        E=E,
        F=F,
        H=H,
        dFds=dFds,
        dissipation=D,
        w_norm=w_norm,
        ws_norm=ws_norm,
        report=report,
    )


def lyapunov_trace(
    history: SolutionHistory,
    r0: float,
    s_values: FloatArray,
    blowup_time: float,
    gamma: float | None = None,
    y: FloatArray | None = None,
    weights: FloatArray | None = None,
) -> LyapunovTrace:
    """E, F, H, dF/ds and dissipation at each s, with the monotonicity report."""
    frames = [
        to_similarity_frame(history, r0, float(s), blowup_time, y, weights) for s in s_values
    ]
    return trace_from_frames(frames, gamma)


# ─── Boundedness ─────────────────────────────────────────────────────

def boundedness_radii(r0: float, count: int = 5) -> FloatArray:
    return np.linspace(0.5 * r0, 1.5 * r0, count)


def boundedness_report(
    history: SolutionHistory,
    radii: FloatArray,
    s_values: FloatArray,
    blowup_time_at: Callable[[float], float],
    growth_factor: float = 10.0,
    y: FloatArray | None = None,
) -> BoundednessReport:
    """Supremum over r and s of ∫(wy²(1−y²) + w² + ws² + |w|^{p+1})ρ.

    Pairs (r, s) outside the cone range e^{−s} ≤ min(T(r), r/2) are skipped;
    any other frame error propagates. ``diverging`` flags growth by more than
    ``growth_factor`` between the first and the last similarity time.
    """
    first: list[float] = []
    last: list[float] = []
    values: list[float] = []
    for r in radii:
        T = blowup_time_at(float(r))
        usable = [float(s) for s in s_values if math.exp(-s) <= min(T, r / 2.0)]
        row = [
            boundedness_density(to_similarity_frame(history, float(r), s, T, y)) for s in usable
        ]
        if row:
            first.append(row[0])
            last.append(row[-1])
            values.extend(row)

    if not values:
        return BoundednessReport(
            supremum=0.0, first=0.0, last=0.0, growth_factor=growth_factor,
            diverging=False, samples=0,
        )
    start = max(first)
    end = max(last)
    diverging = end > growth_factor * max(start, 1e-300) and end > 0.0
    return BoundednessReport(
        supremum=float(max(values)),
        first=float(start),
        last=float(end),
        growth_factor=growth_factor,
        diverging=bool(diverging),
        samples=len(values),
    )


def sign_constant_in_cone(history: SolutionHistory, r0: float, blowup_time: float) -> bool:
    """True when u keeps one sign on every recorded slice of the backward cone at (r₀, T₀)."""
    signs: set[float] = set()
    for k, t in enumerate(history.times):
        radius = blowup_time - t
        if radius <= 0.0:
            break
        inside = np.abs(history.r - r0) < radius
        values = history.u[k, inside]
        values = values[np.isfinite(values)]
        signs.update(np.unique(np.sign(values[values != 0.0])).tolist())
        if len(signs) > 1:
            return False
    return True


def soliton_energy(frame: SimilarityFrame) -> float:
    """E(κ₀) on the grid of ``frame``, the reference level for energy criteria."""
    constant = frame.with_fields(
        w=np.full_like(frame.y, frame.params.kappa0),
        ws=np.zeros_like(frame.y),
        wy=np.zeros_like(frame.y),
    )
    return energy_E(constant)
