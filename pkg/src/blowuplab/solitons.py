"""Modulation fits of similarity frames against solitons.

A frame is compared with one soliton θκ(d) or with an alternating sum of k
distorted solitons Σ eᵢκ*(dᵢ, νᵢ). Distances are always the 𝓗 distance of
``functionals.h_norm``: the fit residual vectors are scaled by the square
roots of the quadrature weights times ρ, so their Euclidean norm is that
integral.

Parameters are unconstrained: ξ = argth d for single fits, and for multi
fits ζᵢ = −argth dᵢ together with λᵢ = log(1 + νᵢ).
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import replace

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks
from scipy.stats import linregress

from blowuplab.exceptions import DomainError, FitError
from blowuplab.functionals import (
    h_norm,
    kappa_profile,
    kappa_profile_y,
    rho_weight,
    trapezoid_weights,
)
from blowuplab.models import (
    FloatArray,
    KSelection,
    MultiSolitonFit,
    Params,
    SimilarityFrame,
    SolitonFit,
    ZetaTraceReport,
)

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 200
COLLISION_TOL = 1.0e-3
XI_SCAN = np.linspace(-4.0, 4.0, 81)
LOG_SHIFT_RANGE = (-5.0, 12.0)
NESTED_SHIFT = 1.0e4
MIN_TRACE_FITS = 4


# ─── Synthesis ───────────────────────────────────────────────────────

def synthesize_single(
    theta: int,
    d: float,
    params: Params,
    y: FloatArray,
    weights: FloatArray | None = None,
    r0: float = 1.0,
    s: float = 0.0,
) -> SimilarityFrame:
    """Frame (θκ(d), 0) sampled on ``y``."""
    if not abs(d) < 1.0:
        raise DomainError("synthesize_single", f"velocity must satisfy |d| < 1, got {d}")
    y = np.asarray(y, dtype=float)
    return SimilarityFrame(
        params=params,
        r0=r0,
        s=s,
        y=y,
        w=theta * kappa_profile(d, 0.0, y, params),
        ws=np.zeros_like(y),
        wy=theta * kappa_profile_y(d, 0.0, y, params),
        weights=weights,
    )


def synthesize_multi(
    e1: int,
    zetas: Sequence[float],
    nus: Sequence[float] | None,
    params: Params,
    y: FloatArray,
    weights: FloatArray | None = None,
    r0: float = 1.0,
    s: float = 0.0,
    signs: Sequence[int] | None = None,
) -> SimilarityFrame:
    """Frame (Σᵢ eᵢκ*(−tanh ζᵢ, νᵢ), 0) with eᵢ = e1(−1)^{i+1} unless ``signs`` is given."""
    y = np.asarray(y, dtype=float)
    nus = list(nus) if nus is not None else [0.0] * len(zetas)
    pattern = tuple(signs) if signs is not None else _alternating(e1, len(zetas))
    w, wy = _model_fields(pattern, np.asarray(zetas, float), np.asarray(nus, float), params, y)
    return SimilarityFrame(
        params=params, r0=r0, s=s, y=y, w=w, ws=np.zeros_like(y), wy=wy, weights=weights
    )


def _alternating(e1: int, k: int) -> tuple[int, ...]:
    return tuple(e1 * (-1) ** i for i in range(k))


def _model_fields(
    signs: Sequence[int],
    zetas: FloatArray,
    nus: FloatArray,
    params: Params,
    y: FloatArray,
) -> tuple[FloatArray, FloatArray]:
    w = np.zeros_like(y)
    wy = np.zeros_like(y)
    for sign, zeta, nu in zip(signs, zetas, nus):
        d = -math.tanh(zeta)
        w += sign * kappa_profile(d, nu, y, params)
        wy += sign * kappa_profile_y(d, nu, y, params)
    return w, wy


# ─── Residual vectors ────────────────────────────────────────────────

class _Residual:
    """Weighted residual of a frame against a model (w, wy, 0)."""

    def __init__(self, frame: SimilarityFrame) -> None:
        for name in ("w", "ws", "wy"):
            if not np.all(np.isfinite(getattr(frame, name))):
                raise FitError(f"frame field '{name}' contains non-finite values")
        q = frame.weights if frame.weights is not None else trapezoid_weights(frame.y)
        rho = np.asarray(rho_weight(frame.y, frame.params))
        self.frame = frame
        self.scale_w = np.sqrt(np.clip(q * rho, 0.0, None))
        self.scale_wy = np.sqrt(np.clip(q * rho * (1.0 - frame.y**2), 0.0, None))
        self.tail = self.scale_w * frame.ws

    def vector(self, w: FloatArray, wy: FloatArray) -> FloatArray:
        return np.concatenate(
            [self.scale_w * (self.frame.w - w), self.scale_wy * (self.frame.wy - wy), self.tail]
        )

    def distance(self, w: FloatArray, wy: FloatArray) -> float:
        return float(np.linalg.norm(self.vector(w, wy)))


# ─── Single soliton ──────────────────────────────────────────────────

def fit_single(frame: SimilarityFrame) -> SolitonFit:
    """Best θκ(d) over θ ∈ {±1} and d ∈ (−1, 1) in the 𝓗 distance.

    Each sign branch scans ξ = argth d on a coarse grid and refines the best
    cell with a bounded scalar minimization; the branch with the smaller
    residual wins.
    """
    residual = _Residual(frame)
    params = frame.params
    y = frame.y

    def cost(xi: float, theta: int) -> float:
        d = math.tanh(xi)
        w = theta * kappa_profile(d, 0.0, y, params)
        wy = theta * kappa_profile_y(d, 0.0, y, params)
        return residual.distance(w, wy) ** 2

    best: SolitonFit | None = None
    for theta in (1, -1):
        scan = [cost(float(xi), theta) for xi in XI_SCAN]
        i = int(np.argmin(scan))
        spacing = float(XI_SCAN[1] - XI_SCAN[0])
        result = minimize_scalar(
            cost,
            bounds=(float(XI_SCAN[i]) - spacing, float(XI_SCAN[i]) + spacing),
            args=(theta,),
            method="bounded",
            options={"xatol": 1e-10, "maxiter": MAX_ITERATIONS},
        )
        xi = float(result.x)
        value = float(result.fun)
        if value > scan[i]:
            xi, value = float(XI_SCAN[i]), scan[i]
        fit = SolitonFit(
            theta=theta,
            d=math.tanh(xi),
            residual=math.sqrt(max(value, 0.0)),
            converged=bool(result.success),
            s=frame.s,
        )
        if best is None or fit.residual < best.residual:
            best = fit
    assert best is not None
    logger.debug(
        "single fit s=%g: theta=%d d=%.6f res=%.3e", frame.s, best.theta, best.d, best.residual
    )
    return best


# ─── Multi-soliton ───────────────────────────────────────────────────

def zero_fit(frame: SimilarityFrame) -> MultiSolitonFit:
    """The k = 0 model: the residual is the frame's own norm."""
    return MultiSolitonFit(
        k=0, e1=1, zetas=(), nus=(), residual=h_norm(frame), converged=True, s=frame.s
    )


def seed_multi(frame: SimilarityFrame, k: int) -> MultiSolitonFit:
    """Deterministic starting point for a k-soliton fit.

    The profile w√ρ of κ*(d, 0) peaks at y = −d, so alternating extrema of
    w√ρ located at y* seed ζ = argth y*. Runs of same-sign extrema collapse
    to their largest member and the strongest window of k alternating
    extrema is kept. Without k extrema the seed falls back to
    ζᵢ = i − (k+1)/2 with e1 taken from the dominant extremum.
    """
    if k < 1:
        raise FitError(f"soliton count must be >= 1, got {k}")
    y = frame.y
    profile = frame.w * np.sqrt(np.asarray(rho_weight(y, frame.params)))
    padded = np.concatenate([[0.0], profile, [0.0]])
    maxima, _ = find_peaks(padded)
    minima, _ = find_peaks(-padded)
    extrema = sorted(
        [(int(i) - 1, 1) for i in maxima if padded[i] > 0.0]
        + [(int(i) - 1, -1) for i in minima if padded[i] < 0.0]
    )

    merged: list[tuple[int, int]] = []
    for index, sign in extrema:
        if merged and merged[-1][1] == sign:
            if abs(profile[index]) > abs(profile[merged[-1][0]]):
                merged[-1] = (index, sign)
            continue
        merged.append((index, sign))

    if len(merged) >= k:
        strengths = [abs(profile[i]) for i, _ in merged]
        start = max(
            range(len(merged) - k + 1), key=lambda j: sum(strengths[j : j + k])
        )
        window = merged[start : start + k]
        limit = 1.0 - 1e-6
        zetas = tuple(math.atanh(float(np.clip(y[i], -limit, limit))) for i, _ in window)
        e1 = window[0][1]
    else:
        zetas = _fallback_zetas(k)
        e1 = 1 if not merged else max(merged, key=lambda m: abs(profile[m[0]]))[1]
    return MultiSolitonFit(
        k=k, e1=e1, zetas=zetas, nus=(0.0,) * k, residual=math.nan, converged=False, s=frame.s
    )


def _fallback_zetas(k: int) -> tuple[float, ...]:
    return tuple(float(i) - (k + 1) / 2.0 for i in range(1, k + 1))


def nested_seed(fit: MultiSolitonFit) -> MultiSolitonFit:
    """Extend a k-fit by a (k+1)-th soliton so small it leaves the model unchanged."""
    last = fit.zetas[-1] + 2.0 if fit.zetas else 0.0
    return MultiSolitonFit(
        k=fit.k + 1,
        e1=fit.e1,
        zetas=fit.zetas + (last,),
        nus=fit.nus + (NESTED_SHIFT,),
        residual=math.nan,
        converged=False,
        s=fit.s,
    )


def _unpack(x: FloatArray, k: int) -> tuple[FloatArray, FloatArray]:
    return x[:k], np.expm1(x[k:])


def _admissible(x: FloatArray, k: int) -> bool:
    zetas, log_shifts = x[:k], x[k:]
    if not np.all(np.isfinite(x)):
        return False
    if np.any(log_shifts < LOG_SHIFT_RANGE[0]) or np.any(log_shifts > LOG_SHIFT_RANGE[1]):
        return False
    return bool(np.all(np.diff(zetas) > 0.0))


def _branch_vector(
    x: FloatArray, signs: tuple[int, ...], residual: _Residual
) -> FloatArray:
    frame = residual.frame
    zetas, nus = _unpack(x, len(signs))
    w, wy = _model_fields(signs, zetas, nus, frame.params, frame.y)
    return residual.vector(w, wy)


def _jacobian(
    x: FloatArray, r: FloatArray, signs: tuple[int, ...], residual: _Residual
) -> FloatArray:
    """Central differences, one-sided where a perturbation leaves the domain."""
    jac = np.zeros((r.size, x.size))
    for j in range(x.size):
        step = 1e-6 * max(1.0, abs(x[j]))
        up = x.copy()
        down = x.copy()
        up[j] += step
        down[j] -= step
        try:
            r_up = _branch_vector(up, signs, residual)
        except DomainError:
            r_up = None
        try:
            r_down = _branch_vector(down, signs, residual)
        except DomainError:
            r_down = None
        if r_up is not None and r_down is not None:
            jac[:, j] = (r_up - r_down) / (2.0 * step)
        elif r_up is not None:
            jac[:, j] = (r_up - r) / step
        elif r_down is not None:
            jac[:, j] = (r - r_down) / step
    return jac


def _gauss_newton(
    x0: FloatArray,
    signs: tuple[int, ...],
    residual: _Residual,
    max_iter: int,
) -> tuple[FloatArray, float, bool, int]:
    """Damped Gauss–Newton with step halving; returns (x, residual, converged, iterations)."""
    k = len(signs)
    x = np.asarray(x0, dtype=float).copy()
    r = _branch_vector(x, signs, residual)
    cost = float(r @ r)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        jac = _jacobian(x, r, signs, residual)
        gradient = jac.T @ r
        if float(np.linalg.norm(gradient)) <= 1e-14 * max(1.0, cost):
            converged = True
            break
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        accepted = False
        t = 1.0
        for _ in range(40):
            candidate = x + t * step
            if _admissible(candidate, k):
                try:
                    r_new = _branch_vector(candidate, signs, residual)
                except DomainError:
                    r_new = None
                if r_new is not None:
                    cost_new = float(r_new @ r_new)
                    if cost_new < cost:
                        accepted = True
                        break
            t *= 0.5
        if not accepted:
            converged = cost <= 1e-24 or float(np.linalg.norm(step)) <= 1e-10 * (
                1.0 + float(np.linalg.norm(x))
            )
            break
        decrease = cost - cost_new
        x, r, cost = candidate, r_new, cost_new
        if t * float(np.linalg.norm(step)) <= 1e-12 * (1.0 + float(np.linalg.norm(x))) or (
            decrease <= 1e-15 * max(cost, 1e-300)
        ):
            converged = True
            break
    return x, math.sqrt(max(cost, 0.0)), converged, iterations


def _fit_branch(
    frame: SimilarityFrame,
    residual: _Residual,
    signs: tuple[int, ...],
    zetas: Sequence[float],
    nus: Sequence[float],
    max_iter: int,
) -> MultiSolitonFit | None:
    k = len(signs)
    x0 = np.concatenate([np.asarray(zetas, float), np.log1p(np.asarray(nus, float))])
    x0[k:] = np.clip(x0[k:], *LOG_SHIFT_RANGE)
    if not _admissible(x0, k):
        return None
    try:
        x, value, converged, iterations = _gauss_newton(x0, signs, residual, max_iter)
    except DomainError:
        return None
    zetas_fit, nus_fit = _unpack(x, k)
    gaps = np.diff(zetas_fit)
    return MultiSolitonFit(
        k=k,
        e1=signs[0],
        zetas=tuple(float(z) for z in zetas_fit),
        nus=tuple(float(v) for v in nus_fit),
        residual=value,
        converged=converged,
        degenerate=bool(gaps.size and np.any(gaps < COLLISION_TOL)),
        iterations=iterations,
        s=frame.s,
    )


def fit_multi(
    frame: SimilarityFrame,
    k: int,
    init: MultiSolitonFit | None = None,
    relax_signs: bool = False,
    max_iter: int = MAX_ITERATIONS,
) -> MultiSolitonFit:
    """Fit Σᵢ e1(−1)^{i+1}κ*(−tanh ζᵢ, νᵢ) to the frame in the 𝓗 distance.

    Both e1 branches are tried. With ``init`` the branch of its sign starts
    from it and the other from :func:`seed_multi`; without it both start from
    the extremum seed and from the evenly spaced fallback. With
    ``relax_signs`` every sign pattern is fitted and the best one is returned
    with its ``signs`` recorded.

    Raises:
        FitError: If k < 0 or the frame holds non-finite values.
    """
    if k < 0:
        raise FitError(f"soliton count must be >= 0, got {k}")
    if k == 0:
        return zero_fit(frame)
    residual = _Residual(frame)
    seed = seed_multi(frame, k)

    starts: list[tuple[int, tuple[float, ...], tuple[float, ...]]] = []
    if init is not None:
        if init.k != k:
            raise FitError(f"initial guess has k={init.k}, expected {k}")
        starts.append((init.e1, init.zetas, init.nus))
    for e1 in (seed.e1, -seed.e1):
        starts.append((e1, seed.zetas, seed.nus))
        starts.append((e1, _fallback_zetas(k), (0.0,) * k))

    if relax_signs:
        patterns = list(itertools.product((1, -1), repeat=k))
        best = _best_over(
            frame,
            residual,
            [(pattern, seed.zetas, seed.nus) for pattern in patterns],
            max_iter,
            record_signs=True,
        )
    else:
        best = _best_over(
            frame,
            residual,
            [(_alternating(e1, k), z, n) for e1, z, n in starts],
            max_iter,
        )

    if best is None:
        logger.warning("multi fit k=%d at s=%g found no admissible start", k, frame.s)
        return MultiSolitonFit(
            k=k,
            e1=seed.e1,
            zetas=seed.zetas,
            nus=seed.nus,
            residual=math.nan,
            converged=False,
            s=frame.s,
        )
    if best.degenerate:
        logger.info("multi fit k=%d at s=%g: colliding parameters", k, frame.s)
    return best


def _best_over(
    frame: SimilarityFrame,
    residual: _Residual,
    starts: Sequence[tuple[tuple[int, ...], Sequence[float], Sequence[float]]],
    max_iter: int,
    record_signs: bool = False,
) -> MultiSolitonFit | None:
    best: MultiSolitonFit | None = None
    for signs, zetas, nus in starts:
        fit = _fit_branch(frame, residual, tuple(signs), zetas, nus, max_iter)
        if fit is None:
            continue
        if record_signs:
            fit = replace(fit, signs=tuple(int(v) for v in signs))
        if best is None or fit.residual < best.residual:
            best = fit
    return best


def fit_relaxed_signs(frame: SimilarityFrame, k: int) -> tuple[MultiSolitonFit, bool]:
    """Fit with every sign pattern and report whether the best one alternates."""
    fit = fit_multi(frame, k, relax_signs=True)
    pattern = fit.sign_pattern
    return fit, (pattern == _alternating(pattern[0], k) if pattern else False)


def select_k(frame: SimilarityFrame, k_max: int = 4, threshold: float = 0.05) -> KSelection:
    """Smallest k whose residual falls below ``threshold`` times the frame norm.

    Fits are nested: the k+1 fit starts from the k fit plus a negligible
    soliton, so residuals never increase with k. When no k meets the
    threshold the selection is not accepted and reports the smallest k ≥ 1
    whose residual is within ``threshold`` times the norm of the best one.
    """
    if k_max < 1:
        raise FitError(f"k_max must be >= 1, got {k_max}")
    base = zero_fit(frame)
    norm = base.residual
    if norm == 0.0:
        return KSelection(k=0, fits=(base,), residuals=(0.0,), frame_norm=0.0, threshold=threshold)

    fits: list[MultiSolitonFit | None] = [base]
    previous: MultiSolitonFit = base
    for k in range(1, k_max + 1):
        init = None
        if previous.k >= 1 and math.isfinite(previous.residual):
            init = nested_seed(previous)
        fit = fit_multi(frame, k, init=init)
        fits.append(fit)
        if math.isfinite(fit.residual):
            previous = fit

    residuals = tuple(f.residual if f is not None else math.nan for f in fits)
    chosen = next(
        (k for k, value in enumerate(residuals) if value <= threshold * norm), None
    )
    accepted = chosen is not None
    if chosen is None:
        finite = [(value, k) for k, value in enumerate(residuals) if k >= 1 and math.isfinite(value)]
        if not finite:
            raise FitError(f"no finite soliton fit for k in 1..{k_max} at s={frame.s:g}")
        best = min(finite)[0]
        chosen = min(k for value, k in finite if value <= best + threshold * norm)
        logger.info(
            "no k <= %d meets the %.0f%% threshold at s=%g; reporting k=%d (not accepted)",
            k_max,
            100 * threshold,
            frame.s,
            chosen,
        )
    return KSelection(
        k=chosen,
        fits=tuple(fits),
        residuals=residuals,
        frame_norm=norm,
        threshold=threshold,
        accepted=accepted,
    )


def fit_along_trace(
    frames: Sequence[SimilarityFrame], k: int, init: MultiSolitonFit | None = None
) -> tuple[MultiSolitonFit, ...]:
    """k-fits over frames ordered in s, each warm-started from the previous one."""
    fits: list[MultiSolitonFit] = []
    guess = init
    for frame in sorted(frames, key=lambda f: f.s):
        fit = fit_multi(frame, k, init=guess)
        fits.append(fit)
        if math.isfinite(fit.residual) and k >= 1:
            guess = fit
    return tuple(fits)


# ─── ζ-spacing ───────────────────────────────────────────────────────

def zeta_trace(
    fits: Sequence[MultiSolitonFit], params: Params, tolerance: float = 1e-6
) -> ZetaTraceReport:
    """Regress each ζᵢ(s) on log s and check that adjacent gaps open.

    The predicted slope of ζᵢ is (i − (k+1)/2)(p−1)/2. Gaps are checked on
    the second half of the trace.

    Raises:
        FitError: If the fits do not share k and e1.
    """
    if not fits:
        return ZetaTraceReport(k=0, status="insufficient-data")
    k = fits[0].k
    e1 = fits[0].e1
    if any(f.k != k or f.e1 != e1 for f in fits):
        raise FitError("zeta trace needs fits sharing the soliton count and first sign")

    usable = sorted(
        (f for f in fits if math.isfinite(f.s) and f.s > 0.0 and math.isfinite(f.residual)),
        key=lambda f: f.s,
    )
    predicted = tuple(
        (i - (k + 1) / 2.0) * (params.p - 1.0) / 2.0 for i in range(1, k + 1)
    )
    if len(usable) < MIN_TRACE_FITS or k < 1:
        return ZetaTraceReport(k=k, status="insufficient-data", predicted=predicted)

    log_s = np.log([f.s for f in usable])
    zetas = np.array([f.zetas for f in usable])
    slopes = tuple(float(linregress(log_s, zetas[:, i]).slope) for i in range(k))

    if k < 2:
        return ZetaTraceReport(
            k=k,
            status="single-soliton",
            slopes=slopes,
            predicted=predicted,
            gaps_nondecreasing=True,
        )

    tail = np.diff(zetas, axis=1)[len(usable) // 2 :]
    steps = np.diff(tail, axis=0)
    nondecreasing = bool(np.all(steps >= -tolerance))
    growth = float(np.mean(tail[-1] - tail[0]))
    status = "growing" if nondecreasing and growth > tolerance else "non-growing"
    return ZetaTraceReport(
        k=k,
        status=status,
        slopes=slopes,
        predicted=predicted,
        gaps_nondecreasing=nondecreasing,
        gap_growth=growth,
    )
