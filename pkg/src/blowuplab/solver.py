"""Finite-difference solver for the radial equation u_tt = u_rr + (N−1)/r u_r + |u|^{p−1}u.

The grid is r_j = j·h on [0, R_max]. Time stepping is velocity-Verlet, the
one-step form of the leapfrog scheme, with a step that shrinks as the
amplitude grows. A node dies when |u| passes the amplitude ceiling, when a
stencil neighbour does so in the same step, or when the light cone of an
earlier death reaches it; dead nodes hold NaN and are never read by the
stencil. The blow-up curve is reconstructed from dense amplitude traces by
extrapolating the rate |u| ~ A(T − t)^{−2/(p−1)}.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable

import numpy as np
from scipy.signal import medfilt, savgol_filter

from blowuplab.exceptions import EmptyCurveError, ScenarioError, SolverError
from blowuplab.functionals import abs_power
from blowuplab.initial_data import generate_initial_data
from blowuplab.models import (
    BlowupCurve,
    BoolArray,
    FieldState,
    FloatArray,
    Params,
    Scenario,
    SolutionHistory,
)

logger = logging.getLogger(__name__)

ALIVE, AMPLITUDE, CONE, STENCIL = 0, 1, 2, 3
CAUSE_NAMES = {ALIVE: "", AMPLITUDE: "amplitude", CONE: "cone", STENCIL: "stencil"}

MIN_TRACE_SAMPLES = 8
MONOTONE_RTOL = 1.0e-2
_TIME_EPS = 1.0e-12
_SNAPSHOTS_PER_REMAINING = 20.0


# ─── Initialization ──────────────────────────────────────────────────

def init_scenario(config: Scenario) -> FieldState:
    """Allocate the grid and sample the initial data; every node starts alive at t = 0."""
    if config.dt is not None and config.dt / config.h > config.cfl * (1.0 + _TIME_EPS):
        raise ScenarioError(
            f"CFL violation: dt/h = {config.dt / config.h:.4g} exceeds {config.cfl:g}"
        )
    r = config.r
    u0, u1 = generate_initial_data(config.generator, r, config.params, config.generator_params)
    if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(u1))):
        raise ScenarioError(f"generator '{config.generator}' produced non-finite data")
    n = r.size
    return FieldState(
        t=0.0,
        r=r,
        u=np.asarray(u0, dtype=float).copy(),
        v=np.asarray(u1, dtype=float).copy(),
        alive=np.ones(n, dtype=bool),
        death_time=np.full(n, np.nan),
        deadline=np.full(n, np.inf),
        death_cause=np.zeros(n, dtype=np.int8),
        death_amplitude=np.full(n, np.nan),
    )


# ─── Stencil ─────────────────────────────────────────────────────────

def _neighbors(u: FloatArray, alive: BoolArray) -> tuple[FloatArray, FloatArray]:
    """Left and right stencil values with dead or missing neighbors reflected.

    A missing neighbor is replaced by the opposite one when that one is alive,
    else by the node itself. This gives the even ghost node at r = 0 and a
    Neumann reflection at R_max.
    """
    n = u.size
    left_raw = np.full(n, np.nan)
    right_raw = np.full(n, np.nan)
    left_ok = np.zeros(n, dtype=bool)
    right_ok = np.zeros(n, dtype=bool)
    left_raw[1:] = u[:-1]
    right_raw[:-1] = u[1:]
    left_ok[1:] = alive[:-1]
    right_ok[:-1] = alive[1:]
    left = np.where(left_ok, left_raw, np.where(right_ok, right_raw, u))
    right = np.where(right_ok, right_raw, np.where(left_ok, left_raw, u))
    return left, right


def radial_laplacian(u: FloatArray, alive: BoolArray, r: FloatArray, dim: int) -> FloatArray:
    """u_rr + (N−1)/r u_r, with N·u_rr on the axis; NaN on dead nodes."""
    h = r[1] - r[0]
    left, right = _neighbors(u, alive)
    urr = (right - 2.0 * u + left) / (h * h)
    ur = (right - left) / (2.0 * h)
    lap = np.empty_like(u)
    lap[0] = dim * urr[0]
    lap[1:] = urr[1:] + (dim - 1) / r[1:] * ur[1:]
    return np.where(alive, lap, np.nan)


def radial_derivative(u: FloatArray, alive: BoolArray, r: FloatArray) -> FloatArray:
    h = r[1] - r[0]
    left, right = _neighbors(u, alive)
    return np.where(alive, (right - left) / (2.0 * h), np.nan)


def _acceleration(u: FloatArray, alive: BoolArray, r: FloatArray, params: Params) -> FloatArray:
    return radial_laplacian(u, alive, r, params.N) + abs_power(u, params.p - 1.0) * u


# ─── Time stepping ───────────────────────────────────────────────────

def adaptive_dt(state: FieldState, scenario: Scenario) -> float:
    """min(CFL·h, safety·max|u|^{−(p−1)/2}, remaining time)."""
    dt = scenario.base_dt
    if np.any(state.alive):
        amplitude = float(np.max(np.abs(state.u[state.alive])))
        if amplitude > 0.0:
            dt = min(dt, scenario.blowup_safety * amplitude ** (-(scenario.params.p - 1.0) / 2.0))
    return min(dt, scenario.max_time - state.t)


def step(state: FieldState, dt: float, scenario: Scenario) -> FieldState:
    """Advance every alive node by one velocity-Verlet step and process deaths.

    Raises:
        ScenarioError: If ``dt`` violates the CFL bound.
        SolverError: If an alive node turns non-finite below the amplitude ceiling.
    """
    h = state.h
    if not 0.0 < dt <= scenario.cfl * h * (1.0 + _TIME_EPS):
        raise ScenarioError(f"CFL violation: dt/h = {dt / h:.4g} exceeds {scenario.cfl:g}")

    params = scenario.params
    alive = state.alive
    v_half = state.v + 0.5 * dt * _acceleration(state.u, alive, state.r, params)
    u_new = state.u + dt * v_half
    v_new = v_half + 0.5 * dt * _acceleration(u_new, alive, state.r, params)
    t_new = state.t + dt
    steps = state.steps + 1

    bad = alive & ~(np.isfinite(u_new) & np.isfinite(v_new))
    if np.any(bad):
        where = ", ".join(f"{x:g}" for x in state.r[bad][:5])
        raise SolverError(
            steps, f"non-finite values at r = {where}; the amplitude ceiling is too large"
        )

    death_time = state.death_time.copy()
    deadline = state.deadline.copy()
    cause = state.death_cause.copy()
    death_amplitude = state.death_amplitude.copy()
    still_alive = alive.copy()

    burst = still_alive & (np.abs(u_new) > scenario.amplitude_ceiling)
    if np.any(burst):
        death_time[burst] = t_new
        cause[burst] = AMPLITUDE
        death_amplitude[burst] = np.abs(u_new[burst])
        still_alive &= ~burst
        # the second half-kick of adjacent nodes read the over-ceiling values
        touched = np.zeros_like(burst)
        touched[1:] |= burst[:-1]
        touched[:-1] |= burst[1:]
        touched &= still_alive
        death_time[touched] = t_new
        cause[touched] = STENCIL
        still_alive &= ~touched
        for j in np.flatnonzero(burst | touched):
            np.minimum(deadline, t_new + np.abs(state.r - state.r[j]), out=deadline)
        logger.debug(
            "t=%.9g: %d node(s) passed the amplitude ceiling, %d stencil neighbour(s) killed",
            t_new,
            int(burst.sum()),
            int(touched.sum()),
        )

    overtaken = still_alive & (t_new >= deadline - _TIME_EPS)
    if np.any(overtaken):
        death_time[overtaken] = deadline[overtaken]
        cause[overtaken] = CONE
        still_alive &= ~overtaken

    u_new = np.where(still_alive, u_new, np.nan)
    v_new = np.where(still_alive, v_new, np.nan)
    return FieldState(
        t=t_new,
        r=state.r,
        u=u_new,
        v=v_new,
        alive=still_alive,
        death_time=death_time,
        deadline=deadline,
        death_cause=cause,
        death_amplitude=death_amplitude,
        steps=steps,
    )


class _HistoryRecorder:
    """Collects snapshots and amplitude traces while the solver runs.

    Snapshots are taken every ``snapshot_every`` in time, tightened to a
    twentieth of the ODE-law time left before blow-up once amplitudes grow.
    """

    def __init__(self, scenario: Scenario, state: FieldState) -> None:
        self._params = scenario.params
        self._every = scenario.snapshot_every
        self._threshold = scenario.amplitude_ceiling * scenario.trace_fraction
        self._times: list[float] = []
        self._u: list[FloatArray] = []
        self._v: list[FloatArray] = []
        self._ur: list[FloatArray] = []
        self._alive: list[BoolArray] = []
        self._traces: dict[int, tuple[list[float], list[float]]] = {}
        self._previous_alive = state.alive.copy()
        self._snapshot(state)
        self._trace(state)

    def observe(self, state: FieldState) -> None:
        self._trace(state)
        fresh = self._previous_alive & ~state.alive & (state.death_cause == AMPLITUDE)
        for i in np.flatnonzero(fresh):
            times, amps = self._traces.setdefault(int(i), ([], []))
            times.append(float(state.death_time[i]))
            amps.append(float(state.death_amplitude[i]))
        self._previous_alive = state.alive.copy()
        if state.t - self._times[-1] >= self._cadence(state) - _TIME_EPS:
            self._snapshot(state)

    def finish(self, state: FieldState) -> None:
        if state.t > self._times[-1]:
            self._snapshot(state)

    def history(self, state: FieldState, stop_reason: str) -> SolutionHistory:
        traces = {
            i: (np.asarray(t, dtype=float), np.asarray(a, dtype=float))
            for i, (t, a) in sorted(self._traces.items())
        }
        return SolutionHistory(
            params=self._params,
            r=state.r,
            times=np.asarray(self._times),
            u=np.vstack(self._u),
            v=np.vstack(self._v),
            ur=np.vstack(self._ur),
            alive=np.vstack(self._alive),
            traces=traces,
            death_time=state.death_time.copy(),
            death_cause=tuple(CAUSE_NAMES[int(c)] for c in state.death_cause),
            final_time=state.t,
            stop_reason=stop_reason,
        )

    def _cadence(self, state: FieldState) -> float:
        if not np.any(state.alive):
            return 0.0
        amplitude = float(np.max(np.abs(state.u[state.alive])))
        if amplitude <= 0.0:
            return self._every
        remaining = ode_gap(self._params, amplitude)
        return min(self._every, remaining / _SNAPSHOTS_PER_REMAINING)

    def _snapshot(self, state: FieldState) -> None:
        self._times.append(state.t)
        self._u.append(state.u.copy())
        self._v.append(state.v.copy())
        self._ur.append(radial_derivative(state.u, state.alive, state.r))
        self._alive.append(state.alive.copy())

    def _trace(self, state: FieldState) -> None:
        amplitude = np.abs(state.u)
        hot = state.alive & (amplitude > self._threshold)
        for i in np.flatnonzero(hot):
            times, amps = self._traces.setdefault(int(i), ([], []))
            times.append(state.t)
            amps.append(float(amplitude[i]))


def run(
    state: FieldState,
    scenario: Scenario,
    on_step: Callable[[FieldState], None] | None = None,
) -> SolutionHistory:
    """Integrate until every node is dead or the time/step budget runs out."""
    recorder = _HistoryRecorder(scenario, state)
    while True:
        if state.all_dead:
            reason = "all-dead"
            break
        if state.t >= scenario.max_time - _TIME_EPS:
            reason = "max-time"
            break
        if state.steps >= scenario.max_steps:
            reason = "max-steps"
            break
        state = step(state, adaptive_dt(state, scenario), scenario)
        recorder.observe(state)
        if on_step is not None:
            on_step(state)
    recorder.finish(state)
    dead = int(np.count_nonzero(np.isfinite(state.death_time)))
    logger.info(
        "solver stopped (%s) at t=%.9g after %d steps, %d/%d nodes dead",
        reason, state.t, state.steps, dead, state.r.size,
    )
    return recorder.history(state, reason)


# ─── Blow-up time and curve ──────────────────────────────────────────

def estimate_T(
    times: FloatArray,
    amplitudes: FloatArray,
    p: float,
    min_samples: int = MIN_TRACE_SAMPLES,
) -> tuple[float, float] | None:
    """Blow-up time from a trace under |u| ≈ A(T − t)^{−2/(p−1)}.

    z = |u|^{−(p−1)/2} is affine in t under the model; the root of a weighted
    linear fit (weights 1/z, matching multiplicative noise) is returned together
    with the RMS relative residual. Returns None for short traces and for traces
    whose amplitude does not grow monotonically.
    """
    times = np.asarray(times, dtype=float)
    amplitudes = np.abs(np.asarray(amplitudes, dtype=float))
    ok = np.isfinite(times) & np.isfinite(amplitudes) & (amplitudes > 0.0)
    times, amplitudes = times[ok], amplitudes[ok]
    if times.size < min_samples or np.any(np.diff(times) <= 0.0):
        return None
    z = amplitudes ** (-(p - 1.0) / 2.0)
    # z must fall at every sample up to relative noise
    if not z[-1] < z[0] or np.any(np.diff(z) > MONOTONE_RTOL * z[:-1]):
        return None
    slope, intercept = np.polyfit(times, z, 1, w=1.0 / z)
    if not slope < 0.0:
        return None
    root = -intercept / slope
    fitted = slope * times + intercept
    residual = float(np.sqrt(np.mean(((z - fitted) / z) ** 2)))
    return float(root), residual


def _smoothed_slopes(T: FloatArray, h: float) -> FloatArray:
    """Edge-padded 3-point median filter followed by a 5-point least-squares derivative."""
    if T.size >= 5:
        smoothed = medfilt(np.pad(T, 1, mode="edge"), kernel_size=3)[1:-1]
        return np.asarray(savgol_filter(smoothed, 5, 2, deriv=1, delta=h))
    if T.size >= 2:
        return np.gradient(T, h)
    return np.zeros_like(T)


def blowup_curve(history: SolutionHistory) -> BlowupCurve:
    """Per-node T(r) from the amplitude traces, T′(r) and the 1-Lipschitz certificate.

    Amplitude deaths take the extrapolated root, never earlier than the death
    itself and never later than ten ODE-law gaps past it. Stencil deaths get one
    more cell width of room. Light-cone deaths take the smaller of the root and the death time.

    Raises:
        EmptyCurveError: If no node died.
    """
    nodes = np.flatnonzero(np.isfinite(history.death_time))
    if nodes.size == 0:
        raise EmptyCurveError()

    params = history.params
    T = np.empty(nodes.size)
    residual = np.full(nodes.size, np.nan)
    method: list[str] = []
    for k, i in enumerate(nodes):
        t_death = float(history.death_time[i])
        cause = history.death_cause[i]
        trace = history.traces.get(int(i))
        estimate = estimate_T(trace[0], trace[1], params.p) if trace is not None else None
        if estimate is None:
            T[k] = t_death
            method.append("cone" if cause == "cone" else "death")
            continue
        root, residual[k] = estimate
        if cause in ("amplitude", "stencil"):
            room = 10.0 * ode_gap(params, float(trace[1][-1]))
            if cause == "stencil":
                room += history.h
            T[k] = t_death + min(max(root - t_death, 0.0), room)
        else:
            T[k] = min(root, t_death)
        method.append("fit")

    r = history.r[nodes]
    h = history.h
    dT = np.empty_like(T)
    breaks = np.flatnonzero(np.diff(nodes) > 1) + 1
    for segment in np.split(np.arange(nodes.size), breaks):
        dT[segment] = _smoothed_slopes(T[segment], h)

    excess = -1.0
    if T.size > 1:
        excess = float(np.max(np.abs(np.diff(T)) - np.abs(np.diff(r)) - 2.0 * h))
    if excess > 0.0:
        logger.warning("blow-up curve exceeds the 1-Lipschitz bound by %.3g", excess)
    return BlowupCurve(
        r=r,
        T=T,
        dT=dT,
        residual=residual,
        method=tuple(method),
        h=h,
        lipschitz_excess=excess,
    )


def check_forward_light_cone(curve: BlowupCurve, r_tol: float | None = None) -> bool | None:
    """T(r) < T(0) + r for every sampled r > r_tol; None when the axis never blew up."""
    if curve.r.size == 0 or curve.r[0] != 0.0:
        return None
    tol = 2.0 * curve.h if r_tol is None else r_tol
    far = curve.r > tol
    return bool(np.all(curve.T[far] < curve.T[0] + curve.r[far]))


# ─── Synthetic histories ─────────────────────────────────────────────

FieldFunction = Callable[[FloatArray, float], FloatArray]


def history_from_function(
    params: Params,
    r: FloatArray,
    times: FloatArray,
    u: FieldFunction,
    ut: FieldFunction,
    ur: FieldFunction,
) -> SolutionHistory:
    """Sample closed-form fields into a history with every node alive and no deaths."""
    r = np.asarray(r, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.size < 2 or np.any(np.diff(times) <= 0.0):
        raise ScenarioError("synthetic history needs strictly increasing sample times")
    rows = [(u(r, float(t)), ut(r, float(t)), ur(r, float(t))) for t in times]
    n = r.size
    return SolutionHistory(
        params=params,
        r=r,
        times=times,
        u=np.vstack([row[0] for row in rows]),
        v=np.vstack([row[1] for row in rows]),
        ur=np.vstack([row[2] for row in rows]),
        alive=np.ones((times.size, n), dtype=bool),
        traces={},
        death_time=np.full(n, np.nan),
        death_cause=("",) * n,
        final_time=float(times[-1]),
        stop_reason="synthetic",
    )


def ode_solution(
    params: Params, blowup_time: float = 1.0
) -> tuple[FieldFunction, FieldFunction, FieldFunction]:
    """Closed-form spatially constant solution κ₀(T − t)^{−2/(p−1)} and its derivatives."""

    def u(r: FloatArray, t: float) -> FloatArray:
        return np.full_like(r, params.kappa0 * (blowup_time - t) ** (-params.alpha))

    def ut(r: FloatArray, t: float) -> FloatArray:
        return np.full_like(
            r, params.alpha * params.kappa0 * (blowup_time - t) ** (-params.alpha - 1.0)
        )

    def ur(r: FloatArray, _t: float) -> FloatArray:
        return np.zeros_like(r)

    return u, ut, ur


def ode_gap(params: Params, amplitude: float) -> float:
    """Time left before blow-up for the ODE solution at the given amplitude."""
    return math.pow(params.kappa0 / amplitude, 1.0 / params.alpha)
