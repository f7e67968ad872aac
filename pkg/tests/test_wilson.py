import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plugflow import _kernel as K
from plugflow.core import DomainError, PointW3, PointWNd, Terminal
from plugflow.integrate import IntegratorConfig, default_config, integrate
from plugflow.profiles import HomotopyProfile, WilsonNdProfile
from plugflow.wilson import (
    DzFlow,
    PlugEmbedding,
    Wilson3Flow,
    Wilson3Plug,
    WilsonNdFlow,
    WilsonNdPlug,
    deactivation_constant,
    embed_plug_field,
    export_field_csv,
    nd_homotopy_field,
    wilson3_field,
    wilson3_homotopy_field,
    wilson_nd_field,
)
from oracles import rk4, rk4_until

PLUG = Wilson3Plug()
ND = WilsonNdPlug()


def w3_rhs(t=0.0):
    P = PLUG.kernel_params(t)
    return lambda y: np.array(K.field(K.MODE_W3, P, t, y[0], y[1], y[2]))


def test_field_values():
    v = wilson3_field(PLUG, PointW3(-1.0, 0.0, 2.0))
    assert v["z"] == 0.0 and v["theta"] == -1.0 and v["r"] == 0.0
    v = wilson3_field(PLUG, PointW3(1.0, 0.0, 2.0))
    assert v["z"] == 0.0 and v["theta"] == 1.0
    assert wilson3_field(PLUG, PointW3(-2.0, 1.0, 1.5)) == {"z": 1.0, "theta": 0.0, "r": 0.0}


def test_homotopy_field_agrees_with_kernel():
    hp = HomotopyProfile()
    rng = np.random.default_rng(0)
    for _ in range(200):
        t = rng.uniform(0, 2)
        p = PointW3(rng.uniform(-2, 2), rng.uniform(0, 2 * math.pi), rng.uniform(1, 3))
        v = wilson3_homotopy_field(PLUG, hp, t, p)
        k = K.field(K.MODE_W3, PLUG.kernel_params(t, hp), t, p.z, p.theta, p.r)
        assert v["z"] == pytest.approx(k[0], abs=1e-14) and v["theta"] == pytest.approx(k[1], abs=1e-14)


def test_dz_plug_exit_time():
    tr = integrate(DzFlow(), PointW3(-2.0, 0.4, 1.7))
    assert tr.terminal is Terminal.Exited
    assert tr.end_time == pytest.approx(4.0, abs=1e-12)


def test_collar_seed_exits_opposite():
    tr = integrate(Wilson3Flow(), PointW3(-2.0, 0.0, 1.1))
    z, th, r = tr.end_state
    assert tr.terminal is Terminal.Exited
    assert z == pytest.approx(2.0) and abs(math.remainder(th, 2 * math.pi)) < 1e-6 and r == pytest.approx(1.1)


def test_exit_against_rk4_oracle():
    seed = PointW3(-2.0, 0.5, 1.6)
    tr = integrate(Wilson3Flow(), seed, default_config(Wilson3Flow()))
    t_ref, y_ref = rk4_until(w3_rhs(), seed.as_array(), 2e-3, lambda y: y[0] - 2.0, 100.0)
    assert tr.end_time == pytest.approx(t_ref, abs=1e-7)
    assert abs(math.remainder(tr.end_state[1] - y_ref[1], 2 * math.pi)) < 1e-7


def test_segment_against_rk4_oracle():
    """flow_fixed over a fixed time, compared with RK4 at a much finer step."""
    y0 = np.array([-1.3, 2.0, 1.95])
    out = np.empty(3)
    assert K.flow_fixed(K.MODE_W3, PLUG.kernel_params(0.0), 0.0, y0, 5.0, 1e-12, 1e-12, 0.5, out)
    ref = rk4(w3_rhs(), y0, 5.0, 1e-3)
    assert abs(out[0] - ref[0]) < 1e-9 and abs(out[2] - ref[2]) < 1e-12
    assert abs(math.remainder(out[1] - ref[1], 2 * math.pi)) < 1e-9


def test_closed_orbit_period_oracle():
    """gamma_1 (theta decreasing) closes up after time 2 pi."""
    ref = rk4(w3_rhs(), [-1.0, 0.0, 2.0], 2 * math.pi, 1e-3)
    assert ref[0] == -1.0 and ref[1] == pytest.approx(-2 * math.pi, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * math.pi), st.one_of(st.floats(1.0, 1.8), st.floats(2.2, 3.0)))
def test_mirror_exit(theta, r):
    flow = Wilson3Flow()
    tr = integrate(flow, PointW3(-2.0, theta, r), default_config(flow, sample_every=0))
    assert tr.terminal is Terminal.Exited
    assert abs(math.remainder(tr.end_state[1] - theta, 2 * math.pi)) < 1e-6
    assert tr.end_state[2] == r


def test_r_is_conserved_and_trapped_on_the_circle_radius():
    tr = integrate(Wilson3Flow(), PointW3(-2.0, 0.0, 2.0), IntegratorConfig(horizon=2000.0))
    assert tr.terminal is Terminal.TimeHorizon
    assert np.all(tr.states[:, 2] == 2.0)


def test_nd_field_and_homotopy():
    p = PointWNd(-1.0, 0.0, 0.0, 0.0, (), (0.0,))
    v = wilson_nd_field(ND, p)
    assert v["z"] == 0.0 and v["s"] == 1.0 and v["t"] == pytest.approx(math.sqrt(2))
    assert v["y1"] == 0.0 and v["r"] == 0.0
    assert nd_homotopy_field(ND, 0.0, p) == v
    end = nd_homotopy_field(ND, 1.0, p)
    assert end["z"] == 1.0 and end["s"] == 0.0 and end["t"] == 0.0
    half = nd_homotopy_field(ND, 0.5, p)
    assert half["z"] == 1.0
    with pytest.raises(DomainError):
        nd_homotopy_field(ND, 1.5, p)
    with pytest.raises(DomainError):
        wilson_nd_field(ND, PointWNd(0.0, 0.0, 0.0, 0.0, (0.1,), (0.0,)))


def test_nd_higher_dimension_has_trivial_extra_components():
    plug = WilsonNdPlug(WilsonNdProfile(n=6, l=2))
    v = wilson_nd_field(plug, PointWNd(0.3, 1.0, 2.0, 0.2, (0.1, 0.1), (0.2, 0.0)))
    assert v["x5"] == v["x6"] == v["y1"] == v["y2"] == 0.0


def test_nd_mirror_exit():
    flow = WilsonNdFlow()
    seed = PointWNd(-2.0, 1.0, 2.0, 1.3, (), (0.0,))
    tr = integrate(flow, seed, IntegratorConfig())
    assert tr.terminal is Terminal.Exited
    assert abs(math.remainder(tr.end_state[1] - 1.0, 2 * math.pi)) < 1e-6
    assert abs(math.remainder(tr.end_state[2] - 2.0, 2 * math.pi)) < 1e-6


def test_deactivation_constant():
    hp = HomotopyProfile()
    assert deactivation_constant(PLUG, hp, 0.0) == 0.0
    vals = [deactivation_constant(PLUG, hp, t) for t in (0.25, 0.5, 1.0)]
    assert all(v > 0 for v in vals) and vals == sorted(vals)


def test_embedding_outside_and_seam():
    emb = PlugEmbedding(z0=0.0, dz_scale=0.5, center=(0.0, 0.0), scale=0.5)
    v = embed_plug_field(emb, lambda p: wilson3_field(PLUG, p), [0.0, 5.0, 0.0])
    assert v["Z"] == 1.0 and v["X1"] == 0.0
    raw = embed_plug_field(emb, lambda p: wilson3_field(PLUG, p), [0.99, 0.0, 1.0])
    assert raw["Z"] == pytest.approx(emb.delta)
    norm = embed_plug_field(emb, lambda p: wilson3_field(PLUG, p), [0.99, 0.0, 1.0], normalize=True)
    assert norm["Z"] == pytest.approx(1.0) and abs(norm["X1"]) < 1e-15


def test_embedding_roundtrip():
    emb = PlugEmbedding(z0=1.0, dz_scale=0.3, center=(2.0, -1.0), scale=0.2)
    p = PointW3(0.4, 2.5, 1.7)
    q = emb.inverse(emb.forward(p))
    assert q.z == pytest.approx(p.z) and q.theta == pytest.approx(p.theta) and q.r == pytest.approx(p.r)
    assert emb.inverse([10.0, 0.0, 0.0]) is None


def test_export_csv(tmp_path):
    path = tmp_path / "field.csv"
    export_field_csv(path, PLUG, nz=5, nr=3)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 15 and float(rows[0]["dz"]) == 1.0
