from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowuplab.exceptions import DomainError
from blowuplab.functionals import (
    abs_power,
    dissipation,
    energy_E,
    functional_F,
    functional_H,
    gauss_grid,
    h_norm,
    hardy_sobolev_ratio,
    integrate,
    kappa,
    kappa_star,
    kappa_y,
    lyapunov_factor,
    rho_weight,
    similarity_grid,
    stationary_residual,
    trapezoid_weights,
)
from blowuplab.models import Params, SimilarityFrame, SolitonParams

P3 = Params(p=3.0, N=3)


def _constant_frame(params: Params, value: float, s: float = 0.0) -> SimilarityFrame:
    y, q = gauss_grid(64)
    return SimilarityFrame(
        params=params,
        r0=1.0,
        s=s,
        y=y,
        w=np.full_like(y, value),
        ws=np.zeros_like(y),
        wy=np.zeros_like(y),
        weights=q,
    )


def _soliton_frame(d: float, params: Params = P3) -> SimilarityFrame:
    y, q = gauss_grid(96)
    return SimilarityFrame(
        params=params,
        r0=1.0,
        s=0.0,
        y=y,
        w=np.asarray(kappa(d, y, params)),
        ws=np.zeros_like(y),
        wy=np.asarray(kappa_y(d, y, params)),
        weights=q,
    )


def test_params_kappa0_for_cubic_is_sqrt_two() -> None:
    assert P3.kappa0 == pytest.approx(math.sqrt(2.0))
    assert P3.alpha == pytest.approx(1.0)


def test_params_rejects_supercritical_exponent() -> None:
    with pytest.raises(DomainError):
        Params(p=4.0, N=3)
    with pytest.raises(DomainError):
        Params(p=1.0, N=1)


def test_rho_weight_is_undefined_on_the_boundary() -> None:
    assert rho_weight(0.0, P3) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        rho_weight(np.array([0.0, 1.0]), P3)


def test_kappa_at_zero_velocity_is_constant_soliton() -> None:
    y = similarity_grid(21)
    np.testing.assert_allclose(kappa(0.0, y, P3), P3.kappa0)
    np.testing.assert_allclose(kappa_y(0.0, y, P3), 0.0)


def test_kappa_rejects_velocity_outside_unit_interval() -> None:
    with pytest.raises(DomainError):
        kappa(1.0, 0.0, P3)


def test_kappa_y_matches_finite_difference() -> None:
    y = np.linspace(-0.9, 0.9, 37)
    step = 1e-6
    numeric = (np.asarray(kappa(0.4, y + step, P3)) - np.asarray(kappa(0.4, y - step, P3))) / (
        2 * step
    )
    np.testing.assert_allclose(kappa_y(0.4, y, P3), numeric, rtol=1e-6)


def test_kappa_star_without_shift_reduces_to_kappa() -> None:
    y = similarity_grid(41)
    sp = SolitonParams(theta=1, d=-0.3, nu=0.0)
    np.testing.assert_allclose(kappa_star(sp, y, P3), kappa(-0.3, y, P3))


def test_soliton_params_enforce_shift_bound() -> None:
    with pytest.raises(DomainError):
        SolitonParams(theta=1, d=0.5, nu=-0.6)
    with pytest.raises(DomainError):
        SolitonParams(theta=0, d=0.0)


def test_h_norm_of_constant_soliton() -> None:
    # ∫ 2(1 − y²) dy = 8/3 over (−1, 1)
    assert h_norm(_constant_frame(P3, P3.kappa0)) == pytest.approx(math.sqrt(8.0 / 3.0), abs=1e-6)


def test_energy_of_constant_soliton_is_four_thirds() -> None:
    assert energy_E(_constant_frame(P3, P3.kappa0)) == pytest.approx(4.0 / 3.0, abs=1e-6)


@pytest.mark.parametrize("d", [-0.9, -0.6, -0.3, 0.3, 0.6, 0.9])
def test_energy_is_independent_of_soliton_velocity(d: float) -> None:
    assert energy_E(_soliton_frame(d)) == pytest.approx(4.0 / 3.0, abs=1e-6)


def test_lyapunov_functional_with_unit_gamma_at_s_zero() -> None:
    frame = _constant_frame(P3, P3.kappa0, s=0.0)
    assert functional_F(frame) == pytest.approx(4.0 / 3.0, abs=1e-9)
    assert functional_H(frame, 1.0) == pytest.approx(4.0 / 3.0 * math.e, abs=1e-9)


def test_lyapunov_factor_flattens_the_extremal_growth_of_f() -> None:
    # F(s) = exp(-γe^{-s}) solves dF/ds = γe^{-s}F, the worst case the inequality allows.
    gamma = 1.3
    s = np.linspace(0.5, 4.0, 9)
    F = np.exp(-gamma * np.exp(-s))
    H = F * np.array([lyapunov_factor(gamma, value) for value in s])
    assert np.all(np.diff(F) > 0.0)
    np.testing.assert_allclose(H, 1.0, rtol=1e-12)


def test_functional_h_rejects_negative_gamma() -> None:
    with pytest.raises(DomainError):
        functional_H(_constant_frame(P3, P3.kappa0), -0.1)


def test_dissipation_vanishes_for_stationary_frame() -> None:
    assert dissipation(_constant_frame(P3, P3.kappa0)) == 0.0


def test_h_norm_rejects_empty_grid() -> None:
    empty = np.empty(0)
    frame = SimilarityFrame(params=P3, r0=1.0, s=0.0, y=empty, w=empty, ws=empty, wy=empty)
    with pytest.raises(DomainError):
        h_norm(frame)


def test_trapezoid_weights_reproduce_trapezoid_integral() -> None:
    y = similarity_grid(51)
    f = np.cos(y) + y**3
    assert float(np.dot(trapezoid_weights(y), f)) == pytest.approx(integrate(f, y), rel=1e-12)


def test_abs_power_maps_zero_to_zero() -> None:
    np.testing.assert_allclose(abs_power(np.array([-2.0, 0.0, 3.0]), 1.5), [2**1.5, 0.0, 3**1.5])


def test_stationary_residual_is_zero_for_constant_soliton() -> None:
    assert stationary_residual(0.0, P3) <= 1e-12


@pytest.mark.parametrize("d", [0.3, -0.3, 0.6, -0.6, 0.9, -0.9])
def test_stationary_residual_converges_at_second_order(d: float) -> None:
    coarse = stationary_residual(d, P3, n=401)
    fine = stationary_residual(d, P3, n=801)
    order = math.log(coarse / fine, 2.0)
    assert order >= 1.9


@given(
    scale=st.floats(min_value=0.1, max_value=10.0),
    amplitude=st.floats(min_value=0.1, max_value=3.0),
)
@settings(max_examples=30, deadline=None)
def test_h_norm_is_homogeneous(scale: float, amplitude: float) -> None:
    y, q = gauss_grid(32)
    frame = SimilarityFrame(
        params=P3, r0=1.0, s=0.0, y=y,
        w=amplitude * np.cos(y), ws=amplitude * y, wy=-amplitude * np.sin(y), weights=q,
    )
    assert h_norm(frame.scaled(scale)) == pytest.approx(scale * h_norm(frame), rel=1e-9)


@given(
    a=st.floats(min_value=-2.0, max_value=2.0),
    b=st.floats(min_value=-2.0, max_value=2.0),
)
@settings(max_examples=30, deadline=None)
def test_h_norm_triangle_inequality(a: float, b: float) -> None:
    y, q = gauss_grid(32)
    first = SimilarityFrame(
        params=P3, r0=1.0, s=0.0, y=y, w=a * y, ws=np.ones_like(y), wy=a * np.ones_like(y),
        weights=q,
    )
    second = first.with_fields(w=b * y**2, ws=-np.ones_like(y) * b, wy=2 * b * y)
    total = first.with_fields(first.w + second.w, first.ws + second.ws, first.wy + second.wy)
    assert h_norm(total) <= h_norm(first) + h_norm(second) + 1e-12


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_hardy_sobolev_ratio_is_bounded_over_test_family(p: float) -> None:
    params = Params(p=p, N=3)
    y, q = gauss_grid(200)
    ratios = []
    for m in range(1, 26):
        # polynomial and trigonometric members, 50 in total
        for h, dh in (
            (y**m, m * y ** (m - 1)),
            (np.cos(m * y), -m * np.sin(m * y)),
        ):
            ratios.append(hardy_sobolev_ratio(y, h, dh, params, q))
    assert len(ratios) == 50
    assert max(ratios) <= 4.0


def test_hardy_sobolev_ratio_rejects_zero_function() -> None:
    y, q = gauss_grid(16)
    with pytest.raises(DomainError):
        hardy_sobolev_ratio(y, np.zeros_like(y), np.zeros_like(y), P3, q)
