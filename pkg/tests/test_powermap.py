from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cube_grid, near_unit_sphere
from qrdyn.errors import DomainError
from qrdyn.powermap import (
    PowerMapParams,
    branch_consistency,
    escape_steps,
    iterate_dilatation,
    orbit,
    power_eval,
    power_increment,
    schroder_residual,
)
from qrdyn.zorich import POLE, BeamAddress, IsometryElement, zorich_eval, zorich_invert

P3 = PowerMapParams(3)


@pytest.mark.parametrize("m", [0, 1, 2.5, True])
def test_params_validation(m):
    with pytest.raises(ValueError):
        PowerMapParams(m)


@pytest.mark.parametrize("y, expected", [
    ((0, 0, 1), (0, 0, 1)),
    ((0, 0, math.e), (0, 0, math.exp(9))),
    ((1, 0, 0), (1, 0, 0)),
])
def test_eval_examples(y, expected):
    assert np.allclose(power_eval(np.array(y, dtype=float), P3), expected, rtol=1e-12, atol=1e-14)


def test_fixed_point_identity_exact():
    assert np.array_equal(power_eval(zorich_eval(np.zeros(3)), P3), zorich_eval(np.zeros(3)))


def test_origin_excluded():
    with pytest.raises(DomainError):
        power_eval(np.zeros(3), P3)


def test_increment_matches_direct(rng):
    d = 1e-3 * rng.standard_normal((100, 3))
    assert np.allclose(power_increment(d, P3), power_eval(POLE + d, P3) - POLE, atol=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_modulus_law(a, b, c):
    y = np.array([a, b, c])
    r = np.linalg.norm(y)
    if r < 1e-3:
        return
    assert np.linalg.norm(power_eval(y, P3)) == pytest.approx(r ** 9, rel=1e-9)


def test_schroder_residual_grid():
    assert schroder_residual(np.zeros(3), P3) == 0.0
    assert schroder_residual(cube_grid(-2, 2, 10), P3).max() < 1e-9


def test_schroder_residual_random_and_walls(rng):
    assert schroder_residual(rng.uniform(-1, 1, (500, 3)), P3).max() < 1e-9
    k = rng.integers(-3, 3, 500)
    walls = np.stack([k * np.pi + np.pi / 2, rng.uniform(-4, 4, 500), rng.uniform(-1, 1, 500)], -1)
    assert schroder_residual(walls, P3).max() < 1e-9


def test_branch_consistency_odd_and_even():
    y = np.array([0.3, -0.4, 0.5])
    assert branch_consistency(y, P3, [(0, 0)]) == 0.0
    assert branch_consistency(y, P3, [(0, 0), (2, 0)]) < 1e-9
    # (1, 1) is the point rotation image of (0, 0)
    assert branch_consistency(y, PowerMapParams(2), [(0, 0), (1, 1)]) > 0.1


def test_odd_m_respects_point_rotation():
    y = np.array([0.3, -0.4, 0.5])
    x = zorich_invert(y)
    rot = IsometryElement.point_rotation(np.pi / 2, np.pi / 2)
    assert np.allclose(zorich_invert(y, BeamAddress(1, 1)), rot(x))
    assert branch_consistency(y, P3, [(0, 0), (1, 1), (-1, 1), (2, 2)]) < 1e-9


def test_orbit_examples():
    const = orbit(POLE, P3, 4)
    assert np.allclose(const.points, POLE)
    orb = orbit(np.array([0.0, 0.0, math.e]), P3, 2)
    assert np.allclose(orb.moduli, [math.e, math.exp(9), math.exp(81)], rtol=1e-12)


def test_orbit_flags_truncation():
    orb = orbit(np.array([0.0, 0.0, math.e]), P3, 10)
    assert orb.truncated and len(orb) < 11


def test_repelling_probe():
    start = POLE + np.array([1e-4, 0.0, 0.0])
    steps = escape_steps(start, P3)
    assert steps is not None and 0 < steps < 10


def test_uniform_quasiregularity_probe():
    # reference is a dense t = 1 estimate; 100-point maxima are noisy
    ref = iterate_dilatation(near_unit_sphere(np.random.default_rng(99), 20_000), P3, 1).max()
    Y = near_unit_sphere(np.random.default_rng(0), 100)
    for t in range(1, 5):
        K = iterate_dilatation(Y, P3, t)
        assert np.all(np.isfinite(K))
        assert K.max() <= 1.5 * ref
