"""Initial data generators for radial scenarios.

Each generator maps a radial grid and its options to the pair (u₀, u₁) of
initial position and velocity. Every generator also honours two optional
blocks: ``perturbation`` (a compact C² bump added to the data) and ``noise``
(a seeded smooth random modulation).
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping
from pathlib import Path
from typing import Any

import numpy as np

from blowuplab.exceptions import ScenarioError
from blowuplab.functionals import kappa_profile, kappa_profile_y
from blowuplab.models import FloatArray, Params

logger = logging.getLogger(__name__)

InitialData = tuple[FloatArray, FloatArray]
Generator = Callable[[FloatArray, Params, Mapping[str, Any]], InitialData]


# ─── Shape helpers ───────────────────────────────────────────────────

def compact_bump(r: FloatArray, center: float, width: float) -> FloatArray:
    """C² bump (1 − x²)³ on |x| < 1 with x = (r − center)/width."""
    if width <= 0.0:
        raise ScenarioError(f"bump width must be > 0, got {width}")
    x = (r - center) / width
    return np.where(np.abs(x) < 1.0, (1.0 - x * x) ** 3, 0.0)


def smoothstep(x: FloatArray) -> FloatArray:
    """C² ramp 6x⁵ − 15x⁴ + 10x³ clipped to [0, 1]."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


def plateau(r: FloatArray, center: float, half_width: float, join: float) -> FloatArray:
    """1 on |r − center| ≤ half_width, falling to 0 over a C² join of width ``join``."""
    distance = np.abs(r - center) - half_width
    if join <= 0.0:
        return np.where(distance <= 0.0, 1.0, 0.0)
    return 1.0 - smoothstep(distance / join)


def ode_data(blowup_time: float, params: Params) -> tuple[float, float]:
    """Position and velocity of the spatially constant solution blowing up at T."""
    if blowup_time <= 0.0:
        raise ScenarioError(f"target blow-up time must be > 0, got {blowup_time}")
    u0 = params.kappa0 * blowup_time ** (-params.alpha)
    u1 = params.alpha * params.kappa0 * blowup_time ** (-params.alpha - 1.0)
    return u0, u1


# ─── Generators ──────────────────────────────────────────────────────

def _constant_ode(r: FloatArray, params: Params, options: Mapping[str, Any]) -> InitialData:
    u0, u1 = ode_data(float(options.get("T", 1.0)), params)
    return np.full_like(r, u0), np.full_like(r, u1)


def _zero(r: FloatArray, _params: Params, _options: Mapping[str, Any]) -> InitialData:
    return np.zeros_like(r), np.zeros_like(r)


def _bump(r: FloatArray, _params: Params, options: Mapping[str, Any]) -> InitialData:
    shape = compact_bump(r, float(options.get("center", 0.0)), float(options.get("width", 1.0)))
    return (
        float(options.get("amplitude", 1.0)) * shape,
        float(options.get("velocity", 0.0)) * shape,
    )


def _plateau_pair(r: FloatArray, params: Params, options: Mapping[str, Any]) -> InitialData:
    centers = [float(c) for c in options.get("centers", (0.8, 1.6))]
    if len(centers) != 2 or not centers[0] < centers[1]:
        raise ScenarioError("plateau-pair needs two centers a1 < a2")
    half_widths = _pair(options.get("widths", 0.3), "widths")
    join = float(options.get("join", 0.08))

    left_edge = centers[0] + half_widths[0] + join
    right_edge = centers[1] - half_widths[1] - join
    if left_edge > right_edge:
        raise ScenarioError(
            f"plateau overlap: first plateau ends at {left_edge:g}, "
            f"second starts at {right_edge:g}"
        )

    if "heights" in options:
        heights = _pair(options["heights"], "heights")
        pairs = []
        for height in heights:
            if height == 0.0:
                pairs.append((0.0, 0.0))
                continue
            target = (abs(height) / params.kappa0) ** (-1.0 / params.alpha)
            pos, vel = ode_data(target, params)
            pairs.append((float(np.sign(height)) * pos, float(np.sign(height)) * vel))
    else:
        times = _pair(options.get("blowup_times", 0.3), "blowup_times")
        signs = _pair(options.get("signs", (1.0, -1.0)), "signs")
        pairs = []
        for target, sign in zip(times, signs):
            pos, vel = ode_data(target, params)
            pairs.append((float(np.sign(sign)) * pos, float(np.sign(sign)) * vel))

    u0 = np.zeros_like(r)
    u1 = np.zeros_like(r)
    for center, half_width, (pos, vel) in zip(centers, half_widths, pairs):
        shape = plateau(r, center, half_width, join)
        u0 += pos * shape
        u1 += vel * shape
    return u0, u1


def _selfsimilar_perturbed(
    r: FloatArray, params: Params, options: Mapping[str, Any]
) -> InitialData:
    d_star = float(options.get("d", 0.0))
    if not abs(d_star) < 1.0:
        raise ScenarioError(f"self-similar velocity must satisfy |d| < 1, got {d_star}")
    center = float(options.get("r0", 1.0))
    t0 = float(options.get("T0", 1.0))
    clip = float(options.get("clip", 0.95))
    if t0 <= 0.0 or not 0.0 < clip < 1.0:
        raise ScenarioError("selfsimilar-perturbed needs T0 > 0 and clip in (0, 1)")

    y = np.clip((r - center) / t0, -clip, clip)
    profile = kappa_profile(d_star, 0.0, y, params)
    profile_y = kappa_profile_y(d_star, 0.0, y, params)
    u0 = t0 ** (-params.alpha) * profile
    u1 = t0 ** (-params.alpha - 1.0) * (params.alpha * profile + y * profile_y)

    epsilon = float(options.get("epsilon", 0.0))
    if epsilon:
        width = float(options.get("bump_width", 0.5 * t0))
        u0 = u0 + epsilon * compact_bump(r, center, width)
    return u0, u1


def _custom_table(r: FloatArray, _params: Params, options: Mapping[str, Any]) -> InitialData:
    if "path" not in options:
        raise ScenarioError("custom-table needs a 'path' option")
    path = Path(str(options["path"])).expanduser()
    if not path.exists():
        raise ScenarioError(f"initial data table not found: {path}")
    try:
        table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as e:
        raise ScenarioError(f"cannot parse initial data table {path}: {e}") from e
    if table.shape[1] < 3:
        raise ScenarioError("initial data table needs columns r, u0, u1")
    order = np.argsort(table[:, 0])
    table = table[order]
    return (
        np.interp(r, table[:, 0], table[:, 1]),
        np.interp(r, table[:, 0], table[:, 2]),
    )


GENERATORS: dict[str, Generator] = {
    "constant-ode": _constant_ode,
    "zero": _zero,
    "bump": _bump,
    "plateau-pair": _plateau_pair,
    "selfsimilar-perturbed": _selfsimilar_perturbed,
    "custom-table": _custom_table,
}


def available_generators() -> list[str]:
    return sorted(GENERATORS)


def generate_initial_data(
    name: str,
    r: FloatArray,
    params: Params,
    options: Mapping[str, Any] | None = None,
) -> InitialData:
    """Sample (u₀, u₁) from the named generator on the radial grid ``r``.

    Raises:
        ScenarioError: For an unknown generator name or invalid options.
    """
    generator = GENERATORS.get(name)
    if generator is None:
        raise ScenarioError(
            f"unknown generator '{name}'. Available: {', '.join(available_generators())}"
        )
    options = options or {}
    u0, u1 = generator(r, params, options)
    u0, u1 = _apply_perturbation(r, u0, u1, options.get("perturbation"))
    u0, u1 = _apply_noise(r, u0, u1, options.get("noise"))
    logger.debug("generator %s: max|u0|=%g max|u1|=%g", name, np.abs(u0).max(), np.abs(u1).max())
    return u0, u1


def _apply_perturbation(
    r: FloatArray, u0: FloatArray, u1: FloatArray, block: Mapping[str, Any] | None
) -> InitialData:
    if not block:
        return u0, u1
    shape = compact_bump(r, float(block.get("center", 0.0)), float(block.get("width", 0.2)))
    return (
        u0 + float(block.get("amplitude", 0.0)) * shape,
        u1 + float(block.get("velocity", 0.0)) * shape,
    )


def _apply_noise(
    r: FloatArray, u0: FloatArray, u1: FloatArray, block: Mapping[str, Any] | None
) -> InitialData:
    """Multiply the data by 1 + a·Σ cₘ cos(mπr/R); the cosines keep the data even at r = 0."""
    if not block:
        return u0, u1
    rng = np.random.default_rng(int(block.get("seed", 0)))
    modes = int(block.get("modes", 6))
    amplitude = float(block.get("amplitude", 0.01))
    coefficients = rng.standard_normal(modes) / np.sqrt(modes)
    span = float(r[-1]) if r[-1] > 0 else 1.0
    field = np.zeros_like(r)
    for m, c in enumerate(coefficients, start=1):
        field += c * np.cos(m * np.pi * r / span)
    factor = 1.0 + amplitude * field
    return u0 * factor, u1 * factor


def _pair(value: Any, name: str) -> tuple[float, float]:
    if isinstance(value, (int, float)):
        return float(value), float(value)
    items = [float(v) for v in value]
    if len(items) != 2:
        raise ScenarioError(f"'{name}' needs one value or a pair")
    return items[0], items[1]
