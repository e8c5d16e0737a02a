from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from blowuplab.exceptions import DomainError, FrameError
from blowuplab.functionals import gauss_grid
from blowuplab.models import Params, SimilarityFrame, SolutionHistory
from blowuplab.similarity import (
    _monotonicity_report,
    boundedness_radii,
    boundedness_report,
    eqw_residual,
    fit_gamma,
    frame_s_range,
    inequality_gamma,
    lyapunov_trace,
    radial_term_bound,
    sign_constant_in_cone,
    soliton_energy,
    to_similarity_frame,
    trace_from_frames,
)
from blowuplab.solver import history_from_function, ode_solution

P3 = Params(p=3.0, N=3)
# sample times sit exactly on t = 1 − e^{−s} so frames need no time interpolation
S_GRID = np.linspace(0.0, 8.0, 161)
R_GRID = np.linspace(0.0, 3.0, 601)


@pytest.fixture(scope="module")
def ode_history():
    u, ut, ur = ode_solution(P3, blowup_time=1.0)
    return history_from_function(P3, R_GRID, 1.0 - np.exp(-S_GRID), u, ut, ur)


def test_ode_frame_is_the_constant_soliton(ode_history) -> None:
    frame = to_similarity_frame(ode_history, 1.0, float(S_GRID[40]), 1.0)
    np.testing.assert_allclose(frame.w, P3.kappa0, rtol=1e-9)
    np.testing.assert_allclose(frame.ws, 0.0, atol=1e-8)
    np.testing.assert_allclose(frame.wy, 0.0)
    assert radial_term_bound(frame) == 0.0


def test_frame_rejects_s_before_cone_range(ode_history) -> None:
    with pytest.raises(FrameError, match="exceeds"):
        to_similarity_frame(ode_history, 1.0, 0.0, 1.0)


def test_frame_rejects_center_on_axis(ode_history) -> None:
    with pytest.raises(FrameError):
        to_similarity_frame(ode_history, 0.0, 2.0, 1.0)


def test_frame_rejects_time_after_recorded_data(ode_history) -> None:
    with pytest.raises(FrameError, match="outside recorded"):
        to_similarity_frame(ode_history, 1.0, 10.0, 1.0)


def test_frame_rejects_radii_beyond_grid(ode_history) -> None:
    with pytest.raises(FrameError, match="radial grid"):
        to_similarity_frame(ode_history, 2.9, 1.0, 1.0)


def test_frame_rejects_node_dead_at_later_snapshot(ode_history) -> None:
    u = ode_history.u.copy()
    u[41, np.argmin(np.abs(R_GRID - 1.0))] = np.nan
    history = replace(ode_history, u=u)
    between = 0.5 * float(S_GRID[40] + S_GRID[41])

    with pytest.raises(FrameError, match="dead by"):
        to_similarity_frame(history, 1.0, between, 1.0)
    frame = to_similarity_frame(history, 1.0, float(S_GRID[40]), 1.0)
    assert np.all(np.isfinite(frame.w))


def test_frame_s_range_caps_at_gap_and_resolution() -> None:
    s = frame_s_range(1.0, 1.0, gap=1e-3, h=1e-3, count=5)
    assert s.size == 5
    assert s[0] == pytest.approx(1.0)
    assert s[-1] == pytest.approx(-math.log(8e-3))


def test_frame_s_range_empty_and_single_point() -> None:
    assert frame_s_range(1.0, 1.0, gap=0.5, h=1e-3, count=5).size == 0
    single = frame_s_range(1.0, 1.0, gap=1e-3, h=1e-3, count=1)
    np.testing.assert_allclose(single, [-math.log(8e-3)])


def test_similarity_equation_residual_vanishes_on_ode_frames(ode_history) -> None:
    frames = [to_similarity_frame(ode_history, 1.0, float(S_GRID[k]), 1.0) for k in (59, 60, 61)]
    assert eqw_residual(frames) == pytest.approx(0.0, abs=1e-6)
    assert eqw_residual(frames, include_radial_term=False) == pytest.approx(0.0, abs=1e-6)


def test_similarity_equation_residual_needs_three_even_frames(ode_history) -> None:
    frames = [to_similarity_frame(ode_history, 1.0, float(S_GRID[k]), 1.0) for k in (59, 60, 65)]
    with pytest.raises(DomainError):
        eqw_residual(frames[:2])
    with pytest.raises(DomainError, match="equally spaced"):
        eqw_residual(frames)


def _boosted_history(r: np.ndarray, d: float = 0.2) -> SolutionHistory:
    """Lorentz-boosted ODE solution blowing up at r = 1, t = 1 with slope −d."""
    alpha = P3.alpha
    c = P3.kappa0 * (1.0 - d * d) ** (alpha / 2.0)
    s_grid = np.linspace(0.0, 2.5, 51)

    def xi(radius: np.ndarray, t: float) -> np.ndarray:
        return 1.0 - t + d * (radius - 1.0)

    return history_from_function(
        P3,
        r,
        1.0 - np.exp(-s_grid),
        lambda radius, t: c * xi(radius, t) ** -alpha,
        lambda radius, t: c * alpha * xi(radius, t) ** (-alpha - 1.0),
        lambda radius, t: -c * alpha * d * xi(radius, t) ** (-alpha - 1.0),
    )


def _boosted_frames(cells: int) -> list[SimilarityFrame]:
    history = _boosted_history(np.linspace(0.6, 1.4, cells + 1))
    return [to_similarity_frame(history, 1.0, s, 1.0) for s in (1.95, 2.0, 2.05)]


def test_similarity_equation_residual_shrinks_under_refinement() -> None:
    coarse = eqw_residual(_boosted_frames(80), include_radial_term=False)
    fine = eqw_residual(_boosted_frames(160), include_radial_term=False)
    assert fine < 0.7 * coarse


def test_dropped_radial_term_stays_within_its_bound() -> None:
    frames = _boosted_frames(160)
    with_term = eqw_residual(frames)
    without = eqw_residual(frames, include_radial_term=False)
    bound = radial_term_bound(frames[1])
    assert bound > 0.0
    assert abs(with_term - without) <= bound


def test_inequality_gamma_is_smallest_admissible_value() -> None:
    s = np.array([0.0, 1.0])
    F = np.array([1.0, 1.0])
    dFds = np.array([0.5, 0.0])
    assert inequality_gamma(s, F, dFds, np.zeros(2), 3.0) == pytest.approx(0.5)
    assert inequality_gamma(s, F, np.zeros(2), np.zeros(2), 3.0) == 0.0
    assert math.isinf(inequality_gamma(s, np.zeros(2), dFds, np.zeros(2), 3.0))


def _extremal_growth(gamma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # F = 1.2·exp(−γe^{−s}) grows exactly as fast as the inequality allows.
    s = np.linspace(0.5, 3.2, 12)
    F = 1.2 * np.exp(-gamma * np.exp(-s))
    return s, F, gamma * np.exp(-s) * F


def test_fit_gamma_makes_growing_f_monotone() -> None:
    s, F, dFds = _extremal_growth(2.0)
    D = np.zeros_like(s)

    gamma = fit_gamma(s, F, dFds, D, 3.0)

    assert 1.5 < gamma <= 2.0 + 1e-9
    H = F * np.exp(gamma * np.exp(-s))
    report = _monotonicity_report(s, F, H, dFds, D, gamma, 3.0)
    assert report.h_nonincreasing
    assert report.inequality_holds
    below = 0.5 * gamma
    H_below = F * np.exp(below * np.exp(-s))
    failed = _monotonicity_report(s, F, H_below, dFds, D, below, 3.0)
    assert not (failed.h_nonincreasing and failed.inequality_holds)


def test_fit_gamma_is_zero_for_decreasing_f_and_inf_when_hopeless() -> None:
    s = np.linspace(1.0, 3.0, 8)
    falling = 2.0 - 0.1 * s
    assert fit_gamma(s, falling, np.full_like(s, -0.1), np.zeros_like(s), 3.0) == 0.0

    negative = -1.0 + 0.5 * s - 2.0
    assert math.isinf(fit_gamma(s, negative, np.full_like(s, 0.5), np.zeros_like(s), 3.0))


def test_monotonicity_report_splits_violations_by_half() -> None:
    s = np.linspace(1.0, 2.0, 6)
    H = np.array([1.0, 0.9, 0.8, 0.7, 0.9, 1.1])
    report = _monotonicity_report(s, H, H, np.zeros(6), np.zeros(6), 0.0, 3.0)

    assert not report.h_nonincreasing
    assert report.early_violations == 0
    assert report.late_violations == 2
    assert report.max_h_increase == pytest.approx(0.2)


def test_lyapunov_trace_of_ode_frames_is_flat_and_monotone(ode_history) -> None:
    y, q = gauss_grid(64)
    trace = lyapunov_trace(ode_history, 1.0, S_GRID[20:120:10], 1.0, y=y, weights=q)

    assert trace.gamma == 0.0
    np.testing.assert_allclose(trace.E, 4.0 / 3.0, rtol=1e-6)
    np.testing.assert_allclose(trace.H, trace.F)
    np.testing.assert_allclose(trace.dissipation, 0.0, atol=1e-12)
    assert trace.report.h_nonincreasing
    assert trace.report.inequality_holds
    assert trace.report.early_violations == trace.report.late_violations == 0


def test_trace_requires_frames() -> None:
    with pytest.raises(DomainError):
        trace_from_frames([])


def test_boundedness_supremum_of_ode_frames(ode_history) -> None:
    # (κ₀² + κ₀⁴) ∫(1 − y²) dy = 6 · 4/3
    report = boundedness_report(
        ode_history, boundedness_radii(1.0), S_GRID[20:140:20], lambda _r: 1.0
    )
    assert report.supremum == pytest.approx(8.0, rel=1e-3)
    assert report.samples > 0
    assert not report.diverging


def test_boundedness_without_usable_frames_is_empty(ode_history) -> None:
    report = boundedness_report(ode_history, np.array([1.0]), np.array([0.0]), lambda _r: 1.0)
    assert report.samples == 0
    assert report.supremum == 0.0


def test_sign_constancy_in_backward_cone() -> None:
    def u(r, _t):
        return r - 1.0

    def zero(r, _t):
        return np.zeros_like(r)

    history = history_from_function(P3, R_GRID, np.linspace(0.0, 0.5, 11), u, zero, zero)
    assert not sign_constant_in_cone(history, 1.0, 1.0)
    assert sign_constant_in_cone(history, 2.5, 0.6)


def test_soliton_energy_reference_level(ode_history) -> None:
    y, q = gauss_grid(64)
    frame = to_similarity_frame(ode_history, 1.0, 2.0, 1.0, y, q)
    assert soliton_energy(frame) == pytest.approx(4.0 / 3.0, abs=1e-9)
