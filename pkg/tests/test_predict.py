import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskwarn.core import ObjectState
from riskwarn.predict import (
    GaussianBelief2D,
    UncertaintyParams,
    predict_belief,
    predict_position,
    user_belief,
    user_std,
)


def test_predict_position_examples():
    assert np.allclose(predict_position(ObjectState(0, 1, 2, 0, 0), 7), [1, 2])
    assert np.allclose(predict_position(ObjectState(0, 1, 2, 0.5, -1), 2), [2, 0])
    assert np.allclose(predict_position(ObjectState(0, 3, -4, 9, 9), 0), [3, -4])


def test_negative_offset_rejected():
    with pytest.raises(ValueError):
        predict_position(ObjectState(0, 0, 0, 0, 0), -0.1)
    with pytest.raises(ValueError):
        user_belief(-1, UncertaintyParams())


def test_belief_at_zero_is_sigma0():
    u = UncertaintyParams(sigma0=0.3)
    b = predict_belief(ObjectState(0, 1, 1, 0.3, -2), 0, u)
    assert np.allclose(b.cov, 0.09 * np.eye(2))


def test_belief_axes_for_x_velocity():
    u = UncertaintyParams(0.1, 0.2, 0.05)
    b = predict_belief(ObjectState(0, 0, 0, 1, 0), 2, u)
    # built by hand: rotation is identity, stds 0.1 + 0.2*2 and 0.1 + 0.05*2
    assert np.allclose(b.cov, np.diag([0.5**2, 0.2**2]), atol=1e-15)
    assert np.allclose(b.mean, [2, 0])


def test_belief_axes_for_diagonal_velocity():
    u = UncertaintyParams(0.1, 0.2, 0.05)
    b = predict_belief(ObjectState(0, 0, 0, 1, 1), 2, u)
    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    rot = np.array([[c, -s], [s, c]])
    expected = rot @ np.diag([0.25, 0.04]) @ rot.T
    assert np.allclose(b.cov, expected, atol=1e-14)


def test_stationary_belief_isotropic():
    u = UncertaintyParams(0.1, 0.2, 0.05)
    b = predict_belief(ObjectState(0, 0, 0, 0, 0), 3, u)
    assert np.allclose(b.cov, 0.7**2 * np.eye(2))


def test_user_belief():
    u = UncertaintyParams(0.1, 0.3, 0.0)
    b = user_belief(100, u)
    assert np.allclose(b.mean, 0) and np.allclose(b.cov, 0.01 * np.eye(2))
    stds = user_std(np.linspace(0, 5, 20), UncertaintyParams())
    assert np.all(np.diff(stds) > 0)


def test_belief_rejects_bad_covariance():
    with pytest.raises(ValueError):
        GaussianBelief2D([0, 0], [[1, 0.5], [0.4, 1]])
    with pytest.raises(ValueError):
        GaussianBelief2D([0, 0], [[1, 0], [0, 0]])


def test_uncertainty_validation():
    with pytest.raises(ValueError):
        UncertaintyParams(sigma0=0)
    with pytest.raises(ValueError):
        UncertaintyParams(growth_long=-0.1)


coord = st.floats(-20, 20, allow_nan=False)
offset = st.floats(0, 10, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(coord, coord, coord, coord, offset, offset)
def test_position_is_affine_in_offset(px, py, vx, vy, a, b):
    x = ObjectState(0, px, py, vx, vy)
    pa = predict_position(x, a)
    advanced = ObjectState(0, pa[0], pa[1], vx, vy)
    assert np.allclose(predict_position(x, a + b), predict_position(advanced, b), rtol=1e-12, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(coord, coord, offset, offset, st.floats(0.01, 1), st.floats(0, 1), st.floats(0, 1))
def test_eigenvalues_grow_with_offset(vx, vy, s1, s2, s0, gl, gt):
    u = UncertaintyParams(s0, gl, gt)
    x = ObjectState(0, 0, 0, vx, vy)
    lo, hi = sorted((s1, s2))
    e_lo = np.linalg.eigvalsh(predict_belief(x, lo, u).cov)
    e_hi = np.linalg.eigvalsh(predict_belief(x, hi, u).cov)
    assert np.all(e_hi >= e_lo - 1e-12 * e_hi.max())


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 5), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), offset)
def test_rotation_covariance_equivariance(speed, a, theta, s):
    u = UncertaintyParams(0.2, 0.4, 0.1)
    v = speed * np.array([math.cos(a), math.sin(a)])
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    vr = rot @ v
    c0 = predict_belief(ObjectState(0, 0, 0, *v), s, u).cov
    c1 = predict_belief(ObjectState(0, 0, 0, *vr), s, u).cov
    scale = max(1.0, np.abs(c0).max())
    assert np.allclose(rot @ c0 @ rot.T, c1, rtol=0, atol=1e-12 * scale)
