"""Weights, solitons, norms and the Lyapunov functionals in similarity variables.

Every integral over y is a weighted quadrature on the frame grid: composite
trapezoid by default, or the frame's own weights when it carries them
(Gauss–Legendre for closed-form checks). Grids are truncated to
|y| ≤ 1 − η where the weight ρ = (1−y²)^{2/(p−1)} degenerates.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.integrate import trapezoid

from blowuplab.exceptions import DomainError
from blowuplab.models import FloatArray, Params, SimilarityFrame, SolitonParams

logger = logging.getLogger(__name__)

DEFAULT_ETA = 1.0e-3


# ─── Grids and quadrature ────────────────────────────────────────────

def similarity_grid(n: int = 201, eta: float = DEFAULT_ETA) -> FloatArray:
    """Uniform grid on [−1+η, 1−η]."""
    if n < 3:
        raise DomainError("similarity_grid", f"need at least 3 nodes, got {n}")
    if not 0.0 < eta < 1.0:
        raise DomainError("similarity_grid", f"truncation eta must lie in (0, 1), got {eta}")
    return np.linspace(-1.0 + eta, 1.0 - eta, n)


def gauss_grid(n: int = 64) -> tuple[FloatArray, FloatArray]:
    """Gauss–Legendre nodes and weights on (−1, 1)."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


def integrate(values: FloatArray, y: FloatArray, weights: FloatArray | None = None) -> float:
    if weights is not None:
        return float(np.dot(weights, values))
    return float(trapezoid(values, y))


def trapezoid_weights(y: FloatArray) -> FloatArray:
    """Node weights q with q·f equal to the composite trapezoid integral of f."""
    y = np.asarray(y, dtype=float)
    q = np.zeros_like(y)
    if y.size < 2:
        return q
    gaps = np.diff(y)
    q[:-1] += 0.5 * gaps
    q[1:] += 0.5 * gaps
    return q


def abs_power(w: FloatArray, exponent: float) -> FloatArray:
    """|w|^exponent with 0 mapped to 0, valid for non-integer exponents."""
    return np.power(np.abs(w), exponent)


# ─── Weight and soliton family ───────────────────────────────────────

def rho_weight(y: float | FloatArray, params: Params) -> float | FloatArray:
    y_arr = np.asarray(y, dtype=float)
    if np.any(np.abs(y_arr) >= 1.0):
        raise DomainError("rho_weight", "weight is defined only for |y| < 1")
    rho = np.power(1.0 - y_arr * y_arr, params.alpha)
    return float(rho) if rho.ndim == 0 else rho


def _check_velocity(quantity: str, d: float) -> None:
    if not abs(d) < 1.0:
        raise DomainError(quantity, f"velocity parameter must satisfy |d| < 1, got {d}")


def _profile_base(d: float, nu: float, y: FloatArray, quantity: str) -> FloatArray:
    base = 1.0 + d * y + nu
    if np.any(base <= 0.0):
        raise DomainError(quantity, "denominator base 1 + d*y + nu must be positive")
    return base


def kappa(d: float, y: float | FloatArray, params: Params) -> float | FloatArray:
    """Soliton κ(d, y) = κ₀(1−d²)^{1/(p−1)} / (1+dy)^{2/(p−1)}."""
    _check_velocity("kappa", d)
    y_arr = np.asarray(y, dtype=float)
    if np.any(np.abs(y_arr) >= 1.0):
        raise DomainError("kappa", "profile is defined only for |y| < 1")
    value = kappa_profile(d, 0.0, y_arr, params)
    return float(value) if value.ndim == 0 else value


def kappa_y(d: float, y: float | FloatArray, params: Params) -> float | FloatArray:
    """Analytic ∂ᵧκ(d, y)."""
    _check_velocity("kappa_y", d)
    value = kappa_profile_y(d, 0.0, np.asarray(y, dtype=float), params)
    return float(value) if value.ndim == 0 else value


def kappa_star(sp: SolitonParams, y: float | FloatArray, model: Params) -> float | FloatArray:
    """Distorted soliton κ*(d, ν, y); reduces to κ(d, y) at ν = 0. The sign θ is not applied."""
    value = kappa_profile(sp.d, sp.nu, np.asarray(y, dtype=float), model)
    return float(value) if value.ndim == 0 else value


def kappa_star_y(sp: SolitonParams, y: float | FloatArray, model: Params) -> float | FloatArray:
    value = kappa_profile_y(sp.d, sp.nu, np.asarray(y, dtype=float), model)
    return float(value) if value.ndim == 0 else value


def kappa_profile(d: float, nu: float, y: FloatArray, params: Params) -> FloatArray:
    """Unvalidated-velocity kernel shared by κ and κ*; checks only the denominator."""
    base = _profile_base(d, nu, y, "kappa_star")
    amplitude = params.kappa0 * (1.0 - d * d) ** (1.0 / (params.p - 1.0))
    return amplitude * np.power(base, -params.alpha)


def kappa_profile_y(d: float, nu: float, y: FloatArray, params: Params) -> FloatArray:
    base = _profile_base(d, nu, y, "kappa_star")
    amplitude = params.kappa0 * (1.0 - d * d) ** (1.0 / (params.p - 1.0))
    return -params.alpha * d * amplitude * np.power(base, -params.alpha - 1.0)


# ─── Norms and functionals ───────────────────────────────────────────

def _rho(frame: SimilarityFrame) -> FloatArray:
    return np.asarray(rho_weight(frame.y, frame.params))


def h_norm(frame: SimilarityFrame) -> float:
    """𝓗 norm √∫(w² + wy²(1−y²) + ws²)ρ."""
    if frame.y.size == 0:
        raise DomainError("h_norm", "frame grid is empty")
    y = frame.y
    density = (frame.w**2 + frame.wy**2 * (1.0 - y * y) + frame.ws**2) * _rho(frame)
    return math.sqrt(max(integrate(density, y, frame.weights), 0.0))


def energy_E(frame: SimilarityFrame) -> float:
    p = frame.params.p
    y = frame.y
    density = (
        0.5 * frame.ws**2
        + 0.5 * frame.wy**2 * (1.0 - y * y)
        + 0.5 * frame.params.mass_coeff * frame.w**2
        - abs_power(frame.w, p + 1.0) / (p + 1.0)
    )
    return integrate(density * _rho(frame), y, frame.weights)


def correction_term(frame: SimilarityFrame) -> float:
    """∫ w ∂ₛw ρ dy, the quantity multiplied by e^{−s} in F."""
    return integrate(frame.w * frame.ws * _rho(frame), frame.y, frame.weights)


def functional_F(frame: SimilarityFrame) -> float:
    return energy_E(frame) - math.exp(-frame.s) * correction_term(frame)


def lyapunov_factor(gamma: float, s: float) -> float:
    """exp(+γe^{−s}), the integrating factor of dF/ds ≤ γe^{−s}F − (2/(p−1))·dissipation."""
    if gamma < 0.0:
        raise DomainError("functional_H", f"gamma must be >= 0, got {gamma}")
    return math.exp(gamma * math.exp(-s))


def functional_H(frame: SimilarityFrame, gamma: float) -> float:
    """H = F·exp(γe^{−s}).

    With this sign dH/ds = exp(γe^{−s})(dF/ds − γe^{−s}F), which the
    differential inequality for F makes non-positive.
    """
    return functional_F(frame) * lyapunov_factor(gamma, frame.s)


def dissipation(frame: SimilarityFrame) -> float:
    """∫ ws² ρ/(1−y²) dy."""
    y = frame.y
    return integrate(frame.ws**2 * _rho(frame) / (1.0 - y * y), y, frame.weights)


def boundedness_density(frame: SimilarityFrame) -> float:
    """∫(wy²(1−y²) + w² + ws² + |w|^{p+1})ρ dy."""
    y = frame.y
    density = (
        frame.wy**2 * (1.0 - y * y)
        + frame.w**2
        + frame.ws**2
        + abs_power(frame.w, frame.params.p + 1.0)
    )
    return integrate(density * _rho(frame), y, frame.weights)


def hardy_sobolev_ratio(
    y: FloatArray,
    h: FloatArray,
    dh: FloatArray,
    params: Params,
    weights: FloatArray | None = None,
) -> float:
    """∫h²ρ/(1−y²) divided by ∫h²ρ + ∫(h′)²ρ(1−y²)."""
    y = np.asarray(y, dtype=float)
    rho = np.asarray(rho_weight(y, params))
    one_minus = 1.0 - y * y
    numerator = integrate(h**2 * rho / one_minus, y, weights)
    denominator = integrate(h**2 * rho, y, weights) + integrate(dh**2 * rho * one_minus, y, weights)
    if denominator <= 0.0:
        raise DomainError("hardy_sobolev_ratio", "denominator vanishes (h is identically zero)")
    return numerator / denominator


# ─── Stationary equation ─────────────────────────────────────────────

def similarity_operator(
    wyy: FloatArray, wy: FloatArray, y: FloatArray, params: Params
) -> FloatArray:
    """ℒw = (1/ρ)∂ᵧ(ρ(1−y²)∂ᵧw) written as (1−y²)w_yy − 2(α+1)y w_y."""
    return (1.0 - y * y) * wyy - 2.0 * (params.alpha + 1.0) * y * wy


def stationary_residual(
    d: float,
    params: Params,
    n: int = 401,
    eta: float = DEFAULT_ETA,
) -> float:
    """ρ-weighted L² norm of the stationary similarity equation applied to κ(d).

    Derivatives are second-order central differences of the sampled profile,
    so the result vanishes at second order under refinement of ``n``.
    """
    _check_velocity("stationary_residual", d)
    y = similarity_grid(n, eta)
    spacing = y[1] - y[0]
    w = np.asarray(kappa(d, y, params))
    wy = (w[2:] - w[:-2]) / (2.0 * spacing)
    wyy = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / spacing**2
    inner = y[1:-1]
    w_in = w[1:-1]
    residual = (
        similarity_operator(wyy, wy, inner, params)
        - params.mass_coeff * w_in
        + abs_power(w_in, params.p - 1.0) * w_in
    )
    rho = np.asarray(rho_weight(inner, params))
    value = math.sqrt(max(integrate(residual**2 * rho, inner), 0.0))
    logger.debug("stationary residual d=%g n=%d: %.3e", d, n, value)
    return value
