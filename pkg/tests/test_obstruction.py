import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plugflow.obstruction import (
    CircleMap,
    InconclusiveError,
    ReebSolidTorus,
    TorusClass,
    TorusLineField,
    arnold_map,
    corpus_from_json,
    default_reeb_corpus,
    degree_along_curve,
    detect_reeb_component,
    doubled_reeb_field,
    find_periodic,
    leaf_normal,
    linear_field,
    meridian_degrees,
    reeb_boundary_orbits,
    rigid_rotation,
    rotated_constant_field,
    rotation_number,
    suspension_field,
    swirl_field,
)


def birkhoff(m, n, x0=0.0):
    x = x0
    for _ in range(n):
        x = m.lift(x)
    return (x - x0) / n


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12).flatmap(lambda q: st.tuples(st.integers(0, q - 1), st.just(q))))
def test_rational_rotation_is_exact(pq):
    p, q = pq
    est = rotation_number(rigid_rotation(p / q), q_max=12)
    assert est.rational == Fraction(p, q) and est.error == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 0.9))
def test_rotation_number_within_bound_of_long_average(omega, k):
    m = arnold_map(omega, k)
    est = rotation_number(m, iterations=2000)
    n_ref = 40_000
    assert abs(est.value - birkhoff(m, n_ref, 0.37)) <= est.error + 2.0 / n_ref + 1e-12


def test_irrational_rotation_value():
    a = math.sqrt(2) - 1
    est = rotation_number(rigid_rotation(a))
    assert est.rational is None and est.error == 2e-4 and abs(est.value - a) < 1e-10


def test_mode_locked_arnold_map():
    est = rotation_number(arnold_map(0.5, 0.6))
    assert est.rational == Fraction(1, 2)
    assert find_periodic(arnold_map(0.5, 0.6), q_max=4) == (1, 2)


def test_rotation_argument_checks():
    with pytest.raises(ValueError):
        rotation_number(rigid_rotation(0.1), iterations=100)
    with pytest.raises(ValueError):
        CircleMap(lambda x: 2 * x)
    with pytest.raises(ValueError):
        rotation_number(CircleMap(lambda x: x + 0.1, orientation_preserving=False))


@given(st.integers(-4, 4))
def test_degree_of_power_map(k):
    def field(x, y):
        z = complex(x, y) ** k if k >= 0 else complex(x, y).conjugate() ** (-k)
        return z.real, z.imag
    circle = lambda s: (math.cos(2 * math.pi * s), math.sin(2 * math.pi * s))  # noqa: E731
    assert degree_along_curve(field, circle) == k


def test_degree_sampled_curve_and_vanishing():
    s = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    pts = np.stack([np.cos(s), np.sin(s)], axis=1)
    assert degree_along_curve(lambda x, y: (1.0, 0.5), pts) == 0
    assert degree_along_curve(lambda x, y: (-y, x), pts) == 1
    with pytest.raises(ValueError):
        degree_along_curve(lambda x, y: (x - 1.0, y), pts)


@pytest.mark.parametrize("tf, expected", [
    (linear_field(math.sqrt(2)), TorusClass.SuspensionNoClosed),
    (linear_field(0.0), TorusClass.SuspensionWithClosed),
    (suspension_field(arnold_map(0.3, 0.5)), TorusClass.SuspensionNoClosed),
    (suspension_field(arnold_map(0.5, 0.6)), TorusClass.SuspensionWithClosed),
    (doubled_reeb_field(), TorusClass.ReebComponent),
])
def test_torus_classification(tf, expected):
    cls, diag = detect_reeb_component(tf)
    assert cls is expected, diag


def test_torus_field_continuity_check():
    with pytest.raises(ValueError):
        TorusLineField(lambda x, y: 0.0 if x < 0.5 else math.pi)


def test_inconclusive_is_raised_not_guessed():
    # the direction turns along both axes: no coordinate circle is a section
    # and none is a leaf, so the detector must refuse to classify
    tf = TorusLineField(lambda x, y: 2 * math.pi * (x + y), name="turning")
    with pytest.raises(InconclusiveError) as err:
        detect_reeb_component(tf)
    assert err.value.diagnostics["closed_leaves"] == []


def test_turning_field_along_one_axis_is_reeb():
    # x = 1/4 and x = 3/4 are closed leaves traversed in opposite directions
    cls, diag = detect_reeb_component(TorusLineField(lambda x, y: 2 * math.pi * x))
    assert cls is TorusClass.ReebComponent and len(diag["closed_leaves"]) == 2


def test_leaf_normal_interpolates_vertical_to_horizontal():
    assert leaf_normal(0.0) == pytest.approx((1.0, 0.0))
    assert leaf_normal(1.0) == pytest.approx((0.0, 1.0), abs=1e-15)


def test_reeb_torus_rejects_bad_fields():
    base = rotated_constant_field(0.0)
    with pytest.raises(ValueError):
        ReebSolidTorus(lambda r, th, t: tuple(np.add(base(r, th, t), (0.0, 0.0, 0.1))))
    with pytest.raises(ValueError):
        ReebSolidTorus(swirl_field())
    ReebSolidTorus(swirl_field(), require_nonsingular=False)


def test_boundary_has_two_opposite_closed_orbits():
    _, rst = default_reeb_corpus()[1]
    orbits = reeb_boundary_orbits(rst)
    assert len(orbits) == 2
    assert sorted(o.direction for o in orbits) == [-1, 1]
    assert all(o.residual < 1e-9 for o in orbits)
    d = abs(math.remainder(orbits[0].theta - orbits[1].theta, 2 * math.pi))
    assert d == pytest.approx(math.pi, abs=1e-6)


def test_meridian_degrees():
    rst = ReebSolidTorus(rotated_constant_field(0.3))
    assert meridian_degrees(rst)["boundary"] == 1
    sw = meridian_degrees(ReebSolidTorus(swirl_field(), require_nonsingular=False))
    assert (sw["boundary"], sw["leaf"]) == (0, 1)


def test_corpus_from_json():
    items = corpus_from_json('[{"kind": "linear", "slope": 0.5, "name": "a"}, {"kind": "reeb_twisted"}]')
    assert [n for n, _ in items] == ["a", "reeb_twisted"]
    with pytest.raises(ValueError):
        corpus_from_json('[{"kind": "nope"}]')
