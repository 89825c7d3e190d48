from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cube_grid
from qrdyn.infspace import (
    BLOWUP_MODEL,
    DEFAULT_MODEL,
    MODEL_CONSTANT,
    OMEGA_3,
    homogeneity_defect,
    inverse_radial_stretch,
    l1_family_check,
    mean_radius,
    model_constant,
    model_volume_mc,
    non_identity_shape_defect,
    radial_stretch,
    rescaled_map,
    unit_ball_volume,
)
from qrdyn.linearizer import RescaleSequence
from qrdyn.numerics import linear_handle
from qrdyn.powermap import PowerMapParams
from qrdyn.zorich import POLE, zorich_eval, zorich_inverse_handle

P3 = PowerMapParams(3)


@pytest.mark.parametrize("x, expected", [((1, 0), (1, 0)), ((1, 1), (math.sqrt(2), math.sqrt(2))),
                                         ((3, 4), (3.75, 5)), ((0, 0), (0, 0))])
def test_radial_stretch_examples(x, expected):
    assert np.allclose(radial_stretch(np.array(x, dtype=float)), expected, rtol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.01, 100))
def test_radial_stretch_properties(a, b, r):
    x = np.array([a, b])
    s = radial_stretch(x)
    assert np.max(np.abs(s)) == pytest.approx(np.hypot(a, b), rel=1e-14, abs=1e-300)
    assert np.allclose(radial_stretch(r * x), r * s, rtol=1e-13)
    assert np.allclose(inverse_radial_stretch(s), x, rtol=1e-13, atol=1e-300)


def test_model_constant_closed_form():
    assert MODEL_CONSTANT ** 3 * 16 / (3 * math.e) == pytest.approx(OMEGA_3, rel=1e-14)
    assert MODEL_CONSTANT > 1
    assert model_constant(1.0) ** 3 * 16 / 3 == pytest.approx(OMEGA_3, rel=1e-14)
    assert unit_ball_volume(2) == pytest.approx(math.pi)


def test_model_volume_monte_carlo():
    est = model_volume_mc(n_samples=1_000_000, seed=0)
    assert abs(est.value - OMEGA_3) <= 3 * est.stderr
    assert abs(est.value / OMEGA_3 - 1) < 0.01


def test_model_volume_independent_of_workers():
    a = model_volume_mc(n_samples=200_000, seed=7, workers=1)
    b = model_volume_mc(n_samples=200_000, seed=7, workers=4)
    assert a == b


def test_model_inverse_round_trip(rng):
    x = rng.uniform(-2, 2, (100, 3))
    assert np.allclose(DEFAULT_MODEL.inverse(DEFAULT_MODEL(x)), x, rtol=1e-13)


def test_homogeneity(rng):
    r = rng.uniform(0.01, 100, 100)
    x = rng.uniform(-3, 3, (100, 3))
    defects = [homogeneity_defect(DEFAULT_MODEL, ri, xi) for ri, xi in zip(r, x)]
    assert max(defects) <= 1e-12 * max(1.0, float(np.max(r)))
    assert homogeneity_defect(DEFAULT_MODEL, 2.0, np.array([1.0, 1.0, 1.0])) <= 1e-15
    assert homogeneity_defect(zorich_eval, 2.0, np.array([0.3, 0.2, 0.1])) > 0.1


def test_mean_radius_linear_maps():
    ident = mean_radius(linear_handle(np.eye(3)), np.zeros(3), 1e-3, 2000)
    # every sampled Jacobian is the identity, so only difference rounding remains
    assert abs(ident.value - 1e-3) <= 3 * ident.stderr + 1e-9 * 1e-3
    double = mean_radius(linear_handle(2 * np.eye(3)), np.zeros(3), 1e-3, 2000)
    assert double.value == pytest.approx(2e-3, rel=1e-9)


def test_mean_radius_of_zorich_inverse_stabilizes():
    f = zorich_inverse_handle()
    ratios = [mean_radius(f, POLE, rho, 20_000).value / rho for rho in (1e-3, 1e-4, 1e-5)]
    assert abs(ratios[2] - ratios[1]) < abs(ratios[1] - ratios[0]) + 1e-3
    # limiting value is (4/pi)^(1/3) for the unit-speed blow-up
    assert ratios[-1] == pytest.approx((4 / math.pi) ** (1 / 3), rel=2e-3)


def test_rescaled_linear_map():
    A = np.array([[2.0, 0, 0], [0, 0.5, 0], [0, 0, 1.0]])
    x = np.array([[0.3, -0.1, 0.4]])
    for rho in (1.0, 1e-3):
        assert np.allclose(rescaled_map(linear_handle(A), np.zeros(3), rho, x, 1000), x @ A.T)
    assert np.allclose(rescaled_map(linear_handle(A), np.zeros(3), 0.1, np.zeros((1, 3)), 1000), 0.0)


def test_rescaled_zorich_inverse_converges():
    f = zorich_inverse_handle()
    x = np.array([[0.3, -0.2, 0.5], [0.1, 0.4, -0.3]])
    vals = [rescaled_map(f, POLE, 10.0 ** -k, x, n_samples=20_000) for k in range(3, 7)]
    diffs = [np.max(np.abs(b - a)) for a, b in zip(vals, vals[1:])]
    assert all(b < 0.2 * a for a, b in zip(diffs, diffs[1:]))
    assert np.max(np.abs(vals[-1] - BLOWUP_MODEL(x))) < 2e-3


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_l1_family(r):
    assert l1_family_check(r, P3, cube_grid(-1, 1, 5)) < 1e-8
    assert l1_family_check(r, P3, np.zeros((1, 3))) == 0.0


def test_shape_defect():
    seq = RescaleSequence.geometric(9)
    assert non_identity_shape_defect(seq).value > 0.1
    # against the true blow-up shape the defect vanishes
    assert non_identity_shape_defect(seq, target=BLOWUP_MODEL).value < 1e-6
    # a single axis point cannot see the shape gap
    assert non_identity_shape_defect(seq, grid=[[0.0, 0.0, 1.0]]).value < 1e-6
