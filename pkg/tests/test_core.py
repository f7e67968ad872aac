import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plugflow.core import (
    DomainError,
    Event,
    EventKind,
    PointW3,
    PointWNd,
    Tangent,
    Terminal,
    TolerancePolicy,
    Trajectory,
    angle_distance,
    normalize_angle,
    point_distance,
)
from oracles import angle_distance_brute

angles = st.floats(-50, 50, allow_nan=False)


@given(angles)
def test_normalize_angle_range_and_idempotent(a):
    n = normalize_angle(a)
    assert 0.0 <= n < 2 * math.pi
    assert normalize_angle(n) == n
    assert abs(math.sin(n) - math.sin(a)) < 1e-9 and abs(math.cos(n) - math.cos(a)) < 1e-9


@given(angles, angles)
def test_angle_distance_matches_brute_force(a, b):
    a, b = normalize_angle(a), normalize_angle(b)
    assert angle_distance(a, b) == pytest.approx(angle_distance_brute(a, b), abs=1e-12)
    assert angle_distance(a, b) == pytest.approx(angle_distance(b, a), abs=1e-15)
    assert 0.0 <= angle_distance(a, b) <= math.pi + 1e-15


@given(angles, angles, angles)
def test_angle_distance_triangle(a, b, c):
    assert angle_distance(a, c) <= angle_distance(a, b) + angle_distance(b, c) + 1e-12


def test_point_domain():
    with pytest.raises(DomainError):
        PointW3(2.5, 0.0, 2.0)
    with pytest.raises(DomainError):
        PointW3(0.0, 0.0, 3.5)
    p = PointW3(0.0, 7.0, 2.0)
    assert 0 <= p.theta < 2 * math.pi
    with pytest.raises(DomainError):
        PointWNd(0.0, 0.0, 0.0, 0.0, (), (1.2,))
    q = PointWNd(0.0, 1.0, 2.0, 0.5, (0.3, 0.4), (0.6,))
    assert q.x_norm == pytest.approx(0.5) and q.y_norm == pytest.approx(0.6)


def test_point_array_roundtrip_and_distance():
    p = PointW3(-1.0, 6.2, 2.0)
    assert PointW3.from_array(p.as_array()) == p
    q = PointW3(-1.0, 0.1, 2.0)
    assert point_distance(p, q) == pytest.approx(angle_distance(6.2, 0.1))


def test_tangent():
    v = Tangent(z=3.0, theta=4.0, r=0.0)
    assert v.norm() == pytest.approx(5.0)
    assert v.close_to(Tangent(z=3.0, theta=4.0, r=1e-14))
    assert not v.close_to(Tangent(z=3.0, theta=4.1, r=0.0))


def test_tolerance_policy_validation():
    TolerancePolicy()
    with pytest.raises(ValueError):
        TolerancePolicy(step_rel_tol=0.0)
    with pytest.raises(ValueError):
        TolerancePolicy(event_tol=1e-3, match_tol=1e-6)


def test_trajectory_invariants():
    ev = (Event(EventKind.HitTop, 4.0, (2.0, 0.0, 2.0)),)
    tr = Trajectory(np.array([0.0, 1.0, 4.0]), np.zeros((3, 3)), ev, Terminal.Exited, ("z", "theta", "r"), {})
    assert tr.check_invariants()
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 2.0, 1.0]), np.zeros((3, 3)), (), Terminal.TimeHorizon, ("z", "theta", "r"), {})
