import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from plugflow import _kernel as K
from plugflow.core import DomainError, GeometryError, PointW3
from plugflow.insertion import (
    DeformedInsertion,
    InsertionSpec,
    _single_params,
    certify_radius,
    default_insertions,
    dumps,
    image_radius,
    loads,
    sabotaged,
    sigma,
    sigma_inverse_face,
    sigma_t,
    validate_insertions,
)
from oracles import rk4

INS1, INS2 = default_insertions()


def test_sigma_maps_centre_onto_the_closed_orbit():
    # derived: the centre line of L_1 lands on gamma_1 after the 4-unit transit
    p = sigma(INS1, 0.0, INS1.theta_i, 2.0)
    assert p.z == pytest.approx(-1.0, abs=1e-12) and p.r == 2.0
    assert p.theta == pytest.approx(2.62, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-0.25, 0.25), st.floats(1.9, 2.1))
@example(-2.0, 0.0, 2.0)
def test_sigma_against_rk4_oracle(z, u, r):
    ins = INS2
    th = ins.theta_i + u
    p = sigma(ins, z, th, r)
    P = _single_params(ins, 0.0)
    start = np.array(K.face_point(P, 0, th, r))
    rhs = lambda y: np.array(K.field(K.MODE_W3, P, 0.0, y[0], y[1], y[2]))  # noqa: E731
    ref = rk4(rhs, start, z + 2.0, 2e-3)
    assert p.z == pytest.approx(ref[0], abs=1e-9)
    assert abs(math.remainder(p.theta - ref[1], 2 * math.pi)) < 1e-9
    assert p.r == pytest.approx(ref[2], abs=1e-14)


def test_sigma_domain():
    with pytest.raises(DomainError):
        sigma(INS1, 0.0, INS1.theta_i + 1.0, 2.0)


def test_face_inverse_roundtrip():
    for d in (INS1, DeformedInsertion(INS1, 0.5)):
        th, r = INS1.theta_i + 0.1, 1.97
        p = sigma_t(d, -2.0, th, r) if isinstance(d, DeformedInsertion) else sigma(d, -2.0, th, r)
        thl, rl = sigma_inverse_face(d, p)
        assert thl == pytest.approx(th, abs=1e-10) and rl == pytest.approx(r, abs=1e-10)


@given(st.floats(-0.25, 0.25), st.floats(1.9, 2.1))
def test_radius_inequality_base(u, r):
    gap = r - image_radius(INS1, INS1.theta_i + u, r)
    assert gap >= 0.0
    if gap == 0.0:
        # quadratic contact: the gap is below rounding only next to (theta_i, 2)
        assert abs(u) < 1e-6 and abs(r - 2.0) < 1e-6


@given(st.sampled_from([0.25, 0.5, 1.0, 2.0]), st.floats(-0.25, 0.25), st.floats(1.9, 2.1))
def test_radius_inequality_strict_when_deformed(t, u, r):
    assert r - image_radius(DeformedInsertion(INS2, t), INS2.theta_i + u, r) > 0.0


def test_certificate_base_and_deformed():
    base = certify_radius(INS1, n=32)
    assert base.pass_ and base.equality_points == [(INS1.theta_i, 2.0)] and base.epsilon > 0
    eps = [certify_radius(DeformedInsertion(INS1, t), n=32).epsilon for t in (0.25, 1.0, 2.0)]
    assert eps == sorted(eps) and eps[0] > 0


def test_certificate_rejects_sabotage_with_witness():
    c = certify_radius(sabotaged(INS1), n=32)
    assert not c.pass_ and c.witness["gap"] < 0
    assert c.to_dict()["witness"] == c.witness


def test_certificate_grid_density():
    with pytest.raises(ValueError):
        certify_radius(INS1, n=16)


def test_certificate_workers_do_not_change_result():
    a = certify_radius(INS2, n=40, workers=1)
    b = certify_radius(INS2, n=40, workers=3)
    assert np.array_equal(a.gaps, b.gaps) and a.epsilon == b.epsilon


def test_validate_insertions_geometry():
    rep = validate_insertions(default_insertions())
    assert rep["D_separation"] > 0 and rep["image_vs_D_margin"] > 0
    overlapping = (INS1, InsertionSpec(index=2, theta_i=5.3, z_c=1.0, face_theta=0.62))
    with pytest.raises(GeometryError):
        validate_insertions(overlapping)


def test_spec_validation_and_json():
    with pytest.raises(ValueError):
        InsertionSpec(index=3, theta_i=1.0)
    with pytest.raises(ValueError):
        InsertionSpec(index=1, theta_i=1.0, r_a=2.05)
    assert loads(dumps(INS1)) == INS1
    d = DeformedInsertion(INS2, 0.5)
    assert loads(dumps(d)) == d
    with pytest.raises(DomainError):
        DeformedInsertion(INS1, 2.5)
