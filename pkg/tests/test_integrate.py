import math

import numpy as np
import pytest

from plugflow.core import EventKind, PointW3, Terminal, TolerancePolicy
from plugflow.integrate import (
    IntegratorConfig,
    _pmap,
    closed_orbit_scan,
    default_config,
    entry_grid_w3,
    exit_match_scan,
    integrate,
    trapped_scan,
    write_mask_csv,
)
from plugflow.kuperberg import KuperbergFlow
from plugflow.wilson import DzFlow, Wilson3Flow

TIGHT = IntegratorConfig(tol=TolerancePolicy(step_abs_tol=1e-12, step_rel_tol=1e-12))


def test_config_validation():
    for bad in ({"horizon": 0.0}, {"max_arc": -1.0}, {"direction": 0}):
        with pytest.raises(ValueError):
            IntegratorConfig(**bad)


def test_default_config_tightens_w_flows_only():
    assert default_config(Wilson3Flow()).tol.step_abs_tol == 1e-12
    assert default_config(Wilson3Flow(t=0.5)).tol.step_abs_tol == 1e-13
    assert default_config(DzFlow()).tol.step_abs_tol == IntegratorConfig().tol.step_abs_tol


def test_generic_field_harmonic_oscillator():
    cfg = IntegratorConfig(tol=TIGHT.tol, horizon=2 * math.pi, max_arc=0.1)
    tr = integrate(lambda y: (y[1], -y[0]), [1.0, 0.0], cfg)
    assert tr.terminal is Terminal.TimeHorizon
    assert np.allclose(tr.states[-1], [1.0, 0.0], atol=1e-9)
    k = len(tr.times) // 2
    assert np.allclose(tr.states[k], [math.cos(tr.times[k]), -math.sin(tr.times[k])], atol=1e-9)


def test_generic_face_event_located():
    # y' = 1 from 0: the face y = 1.234 is hit at time 1.234
    cfg = IntegratorConfig(tol=TIGHT.tol, horizon=10.0, faces=(lambda y: y[0] - 1.234,))
    tr = integrate(lambda y: (1.0,), [0.0], cfg)
    assert tr.terminal is Terminal.Exited
    assert tr.events[-1].time == pytest.approx(1.234, abs=1e-10)


def test_dz_exits_at_time_four_backward_too():
    tr = integrate(DzFlow(), PointW3(-2.0, 1.0, 1.5), TIGHT)
    assert tr.terminal is Terminal.Exited and tr.times[-1] == pytest.approx(4.0, abs=1e-12)
    back = integrate(DzFlow(), PointW3(2.0, 1.0, 1.5), IntegratorConfig(tol=TIGHT.tol, direction=-1))
    assert back.terminal is Terminal.Exited and back.events[-1].kind is EventKind.HitBottom


def test_pmap_is_order_preserving():
    items = list(range(40))
    assert _pmap(lambda x: x * x, items, 1) == _pmap(lambda x: x * x, items, 4)


def test_scans_do_not_depend_on_worker_count():
    flow = Wilson3Flow()
    seeds = entry_grid_w3(4, 5, 1.2, 2.8)
    a = exit_match_scan(flow, seeds, default_config(flow), workers=1)
    b = exit_match_scan(flow, seeds, default_config(flow), workers=3)
    strip = lambda c: [{k: v for k, v in r.items() if k != "wall_time"} for r in c.rows]  # noqa: E731
    assert strip(a) == strip(b)


def test_entry_grid_excludes_open_interval():
    g = entry_grid_w3(8, 9, 1.0, 3.0, exclude=(1.9, 2.1))
    assert len(g) == 64 and all(not 1.9 < p.r < 2.1 for p in g)


def test_wilson_closed_scan_finds_both_circles():
    flow = Wilson3Flow()
    seeds = [PointW3(-1.0, 0.3, 2.0), PointW3(1.0, 0.3, 2.0), PointW3(-1.0, 2.0, 2.0)]
    census = closed_orbit_scan(flow, seeds, default_config(flow, horizon=40.0))
    zs = sorted(round(c["state"][0], 6) for c in census.candidates)
    assert zs == [-1.0, 1.0]
    assert all(c["period"] == pytest.approx(2 * math.pi, abs=1e-7) for c in census.candidates)


def test_trapped_scan_small(tmp_path):
    flow = KuperbergFlow()
    rs = np.array([1.6, 1.995])
    census, mask, delta = trapped_scan(flow, [5.15], rs, default_config(flow, horizon=300.0))
    assert mask.shape == (1, 2) and not mask[0, 0] and mask[0, 1]
    assert delta == pytest.approx(0.005)
    write_mask_csv(tmp_path / "m.csv", [5.15], rs, mask)
    assert (tmp_path / "m.csv").read_text().count("\n") >= 2
