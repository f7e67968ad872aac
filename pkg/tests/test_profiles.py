import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plugflow.core import DomainError
from plugflow.profiles import (
    Arc,
    EtaProfile,
    HomotopyProfile,
    Wilson3Profile,
    WilsonNdProfile,
    dumps,
    eta_value,
    homotopy_scalars,
    loads,
    make_wilson_nd_profile,
)

W = Wilson3Profile()
HP = HomotopyProfile()
zs = st.floats(-2, 2, allow_nan=False)
rs = st.floats(1, 3, allow_nan=False)
thetas = st.floats(0, 2 * math.pi, allow_nan=False)


def test_validators_report_no_violations():
    assert all(v == 0.0 for v in W.validate().values())
    assert all(v == 0.0 for v in WilsonNdProfile().validate().values())
    assert all(v == 0.0 for v in HP.validate().values())


@given(zs, rs)
def test_mirror_symmetry_of_profiles(z, r):
    assert float(W.f(-z, r)) == -float(W.f(z, r))
    assert float(W.g(-z, r)) == float(W.g(z, r))


@given(zs, rs)
def test_g_vanishes_only_on_the_two_circles(z, r):
    g = float(W.g(z, r))
    assert g >= 0.0
    if g == 0.0:
        assert abs(abs(z) - 1.0) < 1e-6 and abs(r - 2.0) < 1e-6


def test_g_zero_on_circles_and_trivial_collar():
    assert float(W.g(1.0, 2.0)) == 0.0 and float(W.g(-1.0, 2.0)) == 0.0
    for z, r in [(-2.0, 2.0), (1.9, 2.0), (0.0, 1.05), (0.5, 2.95)]:
        assert float(W.f(z, r)) == 0.0 and float(W.g(z, r)) == 1.0


def test_g_contact_is_quadratic():
    # 1 - g ~ 1 - c u^2 near the circle: g(u) / u^2 tends to a positive constant
    ratios = [float(W.g(-1.0 + u, 2.0)) / u**2 for u in (1e-2, 5e-3, 2.5e-3)]
    assert ratios[0] > 0 and abs(ratios[-1] - ratios[-2]) / ratios[-1] < 1e-2


def test_profile_constructor_rejects_bad_widths():
    with pytest.raises(ValueError):
        Wilson3Profile(collar=0.3)
    with pytest.raises(ValueError):
        make_wilson_nd_profile(n=3)


@given(thetas, zs, rs)
def test_homotopy_endpoints(theta, z, r):
    f0, g0 = homotopy_scalars(HP, W, 0.0, z, theta, r)
    assert f0 == float(W.f(z, r)) and g0 == float(W.g(z, r))
    f2, g2 = homotopy_scalars(HP, W, 2.0, z, theta, r)
    assert f2 == 0.0 and g2 == 1.0


@settings(max_examples=50)
@given(st.floats(0.01, 2.0), zs, rs)
def test_homotopy_keeps_mirror_and_deactivates_on_arcs(t, z, r):
    theta = HP.insert_arcs[0].center
    f, g = homotopy_scalars(HP, W, t, z, theta, r)
    fm, gm = homotopy_scalars(HP, W, t, -z, theta, r)
    assert f == -fm and g == gm
    assert g >= float(HP.phi(t)) - 1e-15


def test_homotopy_rejects_t_out_of_range():
    with pytest.raises(DomainError):
        homotopy_scalars(HP, W, 2.5, 0.0, 0.0, 2.0)


def test_eta_family():
    ep = EtaProfile()
    assert eta_value(ep, 0.0, 0.3) == 0.0
    assert eta_value(ep, 0.0, 0.5) == 0.0
    assert eta_value(ep, 0.0, 0.9) == 2.0
    assert eta_value(ep, 1.0, 0.1) == 2.0
    u = np.linspace(0, 1, 201)
    assert np.all(np.diff(ep.eta(u)) >= 0)
    with pytest.raises(DomainError):
        eta_value(ep, 0.0, 1.5)
    with pytest.raises(ValueError):
        EtaProfile(start=0.3)


def test_json_roundtrip():
    for p in (W, WilsonNdProfile(n=6, l=2), HP, EtaProfile(0.55, 0.85)):
        assert loads(dumps(p)) == p


def test_arc_bump():
    a = Arc(1.0, 0.2, 0.3)
    assert float(a.bump(1.1)) == 1.0 and float(a.bump(1.35)) == 0.0
    assert 0.0 < float(a.bump(1.25)) < 1.0
