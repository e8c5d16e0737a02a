from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from blowuplab.exceptions import ScenarioError
from blowuplab.initial_data import (
    available_generators,
    compact_bump,
    generate_initial_data,
    plateau,
)
from blowuplab.models import Params

P3 = Params(p=3.0, N=3)
R = np.linspace(0.0, 2.4, 481)


def test_available_generators_lists_every_scenario() -> None:
    assert available_generators() == [
        "bump",
        "constant-ode",
        "custom-table",
        "plateau-pair",
        "selfsimilar-perturbed",
        "zero",
    ]


def test_unknown_generator_is_rejected() -> None:
    with pytest.raises(ScenarioError, match="unknown generator"):
        generate_initial_data("gaussian", R, P3)


def test_constant_ode_for_cubic_and_unit_time() -> None:
    u0, u1 = generate_initial_data("constant-ode", R, P3, {"T": 1.0})
    np.testing.assert_allclose(u0, math.sqrt(2.0))
    np.testing.assert_allclose(u1, math.sqrt(2.0))


def test_plateau_pair_has_opposite_signs_at_the_centers() -> None:
    options = {"centers": [0.8, 1.6], "widths": 0.3, "join": 0.08, "heights": [2.0, -2.0]}
    u0, _ = generate_initial_data("plateau-pair", R, P3, options)
    i1 = int(np.argmin(np.abs(R - 0.8)))
    i2 = int(np.argmin(np.abs(R - 1.6)))
    assert u0[i1] * u0[i2] < 0.0
    assert u0[i1] == pytest.approx(2.0)


def test_plateau_pair_blowup_times_give_ode_data_on_the_plateaus() -> None:
    options = {"centers": [0.8, 1.6], "widths": 0.3, "join": 0.08, "blowup_times": 0.3}
    u0, u1 = generate_initial_data("plateau-pair", R, P3, options)
    inside = np.abs(R - 0.8) <= 0.3
    np.testing.assert_allclose(u0[inside], P3.kappa0 / 0.3)
    np.testing.assert_allclose(u1[inside], P3.kappa0 / 0.3**2)
    np.testing.assert_allclose(u0[np.abs(R - 1.6) <= 0.3], -P3.kappa0 / 0.3)


def test_plateau_pair_rejects_overlap() -> None:
    options = {"centers": [0.8, 1.0], "widths": 0.3, "join": 0.08}
    with pytest.raises(ScenarioError, match="overlap"):
        generate_initial_data("plateau-pair", R, P3, options)


def test_selfsimilar_seed_without_perturbation_is_constant_ode_in_the_cone() -> None:
    options = {"d": 0.0, "r0": 1.0, "T0": 1.0, "epsilon": 0.0}
    u0, u1 = generate_initial_data("selfsimilar-perturbed", R, P3, options)
    ode0, ode1 = generate_initial_data("constant-ode", R, P3, {"T": 1.0})
    cone = np.abs(R - 1.0) < 0.95
    np.testing.assert_allclose(u0[cone], ode0[cone])
    np.testing.assert_allclose(u1[cone], ode1[cone])


def test_selfsimilar_rejects_light_speed_velocity() -> None:
    with pytest.raises(ScenarioError):
        generate_initial_data("selfsimilar-perturbed", R, P3, {"d": 1.0})


def test_compact_bump_is_supported_on_its_width() -> None:
    shape = compact_bump(R, 1.0, 0.2)
    assert shape.max() == pytest.approx(1.0)
    assert np.all(shape[np.abs(R - 1.0) >= 0.2] == 0.0)
    with pytest.raises(ScenarioError):
        compact_bump(R, 1.0, 0.0)


def test_plateau_join_is_monotone() -> None:
    shape = plateau(R, 1.2, 0.3, 0.1)
    right = shape[R >= 1.2]
    assert np.all(np.diff(right) <= 1e-15)
    assert shape[int(np.argmin(np.abs(R - 1.2)))] == 1.0


def test_perturbation_block_adds_a_bump() -> None:
    base, _ = generate_initial_data("zero", R, P3)
    u0, u1 = generate_initial_data(
        "zero", R, P3, {"perturbation": {"center": 1.2, "width": 0.1, "amplitude": 0.5}}
    )
    assert np.all(base == 0.0)
    assert u0.max() == pytest.approx(0.5, rel=1e-3)
    assert np.all(u1 == 0.0)


def test_noise_is_reproducible_for_a_seed() -> None:
    options = {"T": 1.0, "noise": {"seed": 3, "amplitude": 0.01}}
    first, _ = generate_initial_data("constant-ode", R, P3, options)
    second, _ = generate_initial_data("constant-ode", R, P3, options)
    other, _ = generate_initial_data(
        "constant-ode", R, P3, {"T": 1.0, "noise": {"seed": 4, "amplitude": 0.01}}
    )
    np.testing.assert_array_equal(first, second)
    assert not np.array_equal(first, other)


def test_custom_table_interpolates_file(tmp_path: Path) -> None:
    table = tmp_path / "data.csv"
    table.write_text("# r,u0,u1\n0.0,1.0,0.0\n2.4,3.4,1.0\n", encoding="utf-8")
    u0, u1 = generate_initial_data("custom-table", R, P3, {"path": str(table)})
    np.testing.assert_allclose(u0, 1.0 + R)
    np.testing.assert_allclose(u1, R / 2.4)


def test_custom_table_requires_existing_file(tmp_path: Path) -> None:
    with pytest.raises(ScenarioError):
        generate_initial_data("custom-table", R, P3, {"path": str(tmp_path / "missing.csv")})
    with pytest.raises(ScenarioError):
        generate_initial_data("custom-table", R, P3, {})
