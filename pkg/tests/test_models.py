from __future__ import annotations

import json
import math

import numpy as np
import pytest

from blowuplab.exceptions import DomainError, ScenarioError
from blowuplab.models import (
    BlowupCurve,
    EnergyCriterion,
    Evidence,
    MultiSolitonFit,
    Outcome,
    Params,
    PointClassification,
    Scenario,
    SimilarityFrame,
    Verdict,
)

P3 = Params(p=3.0, N=3)


def test_params_mass_coefficient_and_serialization() -> None:
    assert P3.mass_coeff == pytest.approx(2.0)
    assert Params(p=5.0, N=1).alpha == pytest.approx(0.5)
    assert P3.to_dict() == {"p": 3.0, "N": 3}


def test_scenario_rejects_invalid_grids() -> None:
    with pytest.raises(ScenarioError):
        Scenario(params=P3, r_max=0.0, n_cells=10, generator="zero")
    with pytest.raises(ScenarioError):
        Scenario(params=P3, r_max=1.0, n_cells=1, generator="zero")
    with pytest.raises(ScenarioError):
        Scenario(params=P3, r_max=1.0, n_cells=10, generator="zero", cfl=1.5)


def test_scenario_grid_and_dict() -> None:
    scenario = Scenario(params=P3, r_max=2.0, n_cells=8, generator="bump", generator_params={"a": 1})
    assert scenario.h == 0.25
    assert scenario.r[-1] == 2.0
    assert scenario.base_dt == pytest.approx(0.45 * 0.25)
    payload = scenario.to_dict()
    assert payload["params"] == {"p": 3.0, "N": 3}
    assert payload["generator_params"] == {"a": 1}
    json.dumps(payload)


def test_similarity_frame_rejects_boundary_nodes() -> None:
    y = np.linspace(-1.0, 1.0, 5)
    zeros = np.zeros_like(y)
    with pytest.raises(DomainError):
        SimilarityFrame(params=P3, r0=1.0, s=0.0, y=y, w=zeros, ws=zeros, wy=zeros)


def test_similarity_frame_rejects_mismatched_fields_and_axis() -> None:
    y = np.linspace(-0.5, 0.5, 5)
    zeros = np.zeros_like(y)
    with pytest.raises(DomainError):
        SimilarityFrame(params=P3, r0=1.0, s=0.0, y=y, w=zeros[:3], ws=zeros, wy=zeros)
    with pytest.raises(DomainError):
        SimilarityFrame(params=P3, r0=0.0, s=0.0, y=y, w=zeros, ws=zeros, wy=zeros)


def test_similarity_frame_minus_and_scaled() -> None:
    y = np.linspace(-0.5, 0.5, 5)
    frame = SimilarityFrame(params=P3, r0=1.0, s=0.0, y=y, w=y, ws=2 * y, wy=np.ones_like(y))
    difference = frame.minus(frame.scaled(0.5))
    np.testing.assert_allclose(difference.w, 0.5 * y)
    np.testing.assert_allclose(difference.wy, 0.5)


def test_blowup_curve_interpolation_and_rows() -> None:
    r = np.array([0.0, 0.5, 1.0])
    curve = BlowupCurve(
        r=r,
        T=np.array([1.0, 1.2, 1.4]),
        dT=np.array([0.4, 0.4, 0.4]),
        residual=np.zeros(3),
        method=("fit", "fit", "cone"),
        h=0.5,
        lipschitz_excess=-0.1,
    )
    assert curve.lipschitz_ok
    assert curve.value_at(0.25) == pytest.approx(1.1)
    assert curve.slope_at(0.75) == pytest.approx(0.4)
    assert curve.index_of(0.9) == 2
    assert curve.to_rows()[2]["method"] == "cone"


def test_multi_fit_row_pads_to_k_max() -> None:
    fit = MultiSolitonFit(
        k=2, e1=-1, zetas=(-0.5, 0.5), nus=(0.0, 0.1), residual=1e-3, converged=True, s=2.0
    )
    row = fit.to_row(4)
    assert row["zeta2"] == "0.5"
    assert row["zeta3"] == "" and row["nu4"] == ""
    assert fit.sign_pattern == (-1, 1)
    assert fit.ds == pytest.approx((math.tanh(0.5), -math.tanh(0.5)))


def test_point_classification_to_dict_is_json_ready() -> None:
    evidence = Evidence(r0=1.0, k=1, energy=EnergyCriterion(outcome=Outcome.PASS))
    point = PointClassification(
        r0=1.0, verdict=Verdict.NON_CHARACTERISTIC, k=1, evidence=evidence, passed_tests=("energy",)
    )

    payload = point.to_dict()

    assert payload["verdict"] == "non-characteristic"
    assert payload["evidence"]["energy"]["outcome"] == "pass"
    json.dumps(payload)
