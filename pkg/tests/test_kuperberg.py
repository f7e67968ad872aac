import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plugflow import _kernel as K
from plugflow.core import DomainError, EventKind, GeometryError, PointW3, Terminal
from plugflow.insertion import sigma
from plugflow.integrate import IntegratorConfig, default_config, exit_match_scan, entry_grid_w3, integrate
from plugflow.kuperberg import (
    KuperbergFlow,
    ParametricKuperberg,
    QuotientState,
    level_bound,
    level_function,
    parametric_field,
    quotient_field,
    step_transition,
)
from plugflow.wilson import Wilson3Flow, Wilson3Plug

K0 = KuperbergFlow()


def test_t_range_and_teleport_switch():
    with pytest.raises(DomainError):
        KuperbergFlow(t=2.5)
    assert K0.teleport and KuperbergFlow(t=1.0).teleport and not KuperbergFlow(t=1.5).teleport


def test_quotient_field_is_the_wilson_field_outside_images():
    p = PointW3(0.3, 1.0, 1.5)
    v = quotient_field(K0, p)
    w = K.field(K.MODE_W3, Wilson3Plug().kernel_params(0.0), 0.0, p.z, p.theta, p.r)
    assert (v["z"], v["theta"], v["r"]) == tuple(w)


def test_excised_points_are_rejected():
    inside = sigma(K0.bases[0], 0.0, K0.bases[0].theta_i, 2.0)
    assert K0.is_excised(inside)
    with pytest.raises(DomainError):
        quotient_field(K0, inside)
    assert not K0.is_excised(PointW3(0.0, 1.0, 1.3))


def test_entry_then_exit_returns_to_the_image():
    ins = K0.bases[0]
    th, r = ins.theta_i + 0.05, 1.97
    face = sigma(ins, -2.0, th, r)
    st, done = step_transition(K0, QuotientState(face), EventKind.EnterInsertion, 1)
    assert not done and st.level == 1 and st.inside_insertion == 1
    assert st.point.z == -2.0 and st.point.theta == pytest.approx(th) and st.point.r == pytest.approx(r)
    top = QuotientState(PointW3(2.0, st.point.theta, st.point.r), st.stack)
    back, done = step_transition(K0, top, EventKind.HitTop, None)
    expect = sigma(ins, 2.0, th, r)
    assert back.level == 0 and not done
    assert back.point.z == pytest.approx(expect.z, abs=1e-9)
    assert back.point.r == pytest.approx(expect.r, abs=1e-9)


def test_transition_errors():
    with pytest.raises(GeometryError):
        step_transition(K0, QuotientState(PointW3(0.0, 1.0, 2.0)), EventKind.EnterInsertion, 1)
    with pytest.raises(GeometryError):
        step_transition(KuperbergFlow(t=1.5), QuotientState(PointW3(0.0, 4.62, 2.0)), EventKind.EnterInsertion, 1)
    st, done = step_transition(K0, QuotientState(PointW3(2.0, 1.0, 1.5)), EventKind.HitTop, None)
    assert done and st.level == 0


def test_trapped_orbit_level_log():
    flow = K0
    tr = integrate(flow, PointW3(-2.0, 5.15, 1.95), default_config(flow, horizon=500.0))
    assert tr.terminal is Terminal.TimeHorizon
    log = level_function(tr)
    assert log.nu == log.recompute()
    assert log.max_level == tr.diagnostics["max_level"] > 0
    assert all(v >= 0 for v in log.nu)
    assert tr.diagnostics["max_chart_mismatch"] < 1e-8


def test_exiting_orbits_match_and_respect_level_bound():
    flow = KuperbergFlow(t=0.5)
    census = exit_match_scan(flow, entry_grid_w3(6, 9, 1.85, 2.15), default_config(flow))
    assert census.exited == census.total and census.max_mismatch < 1e-5
    assert census.max_level <= level_bound(flow, 4e-4)


def test_away_from_the_insertions_kuperberg_equals_wilson():
    seeds = [PointW3(-2.0, th, r) for th in (0.5, 2.0) for r in (1.2, 2.8)]
    a = exit_match_scan(K0, seeds, default_config(K0))
    b = exit_match_scan(Wilson3Flow(), seeds, default_config(Wilson3Flow()))
    assert [r["exit_angle"] for r in a.rows] == [r["exit_angle"] for r in b.rows]


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1), st.floats(-2, 2), st.floats(0, 2 * math.pi), st.floats(1, 3), st.floats(-1, 1))
def test_parametric_y_components_vanish(s, z, th, r, y):
    v = parametric_field(ParametricKuperberg(), s, PointW3(z, th, r), [y])
    assert v["y1"] == 0.0


def test_parametric_slices():
    fam = ParametricKuperberg()
    p = PointW3(-1.0, 2.0, 2.0)
    base = K.field(K.MODE_W3, K0.params, 0.0, p.z, p.theta, p.r)
    for y in (0.0, 0.3, -0.5):
        v = parametric_field(fam, 0.0, p, [y])
        assert (v["z"], v["theta"], v["r"]) == tuple(base)
    v = parametric_field(fam, 1.0, p, [0.1])
    assert (v["z"], v["theta"], v["r"]) == (1.0, 0.0, 0.0)
    assert fam.slice_t(0.0, [0.95]) == 2.0
    with pytest.raises(DomainError):
        fam.slice_t(0.0, [1.5])
    with pytest.raises(DomainError):
        fam.slice_t(0.0, [0.1, 0.1])
