import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levelsets.cylinder import (
    DriftSpec,
    GridIndicator,
    IntervalShifts,
    RadialGraph,
    d_metric,
    demagnify,
    drift_D,
    empirical_drift_Dn,
    is_in_Bstar,
    m_measure,
    magnify,
    shifted_interval,
    symdiff_measure,
    to_grid,
)
from levelsets.errors import IncompatibleRepresentations, NonRepresentable, NotParallel
from levelsets.geometry import Ball, Ellipsoid, Interval, steiner_data, sym_diff_volume
from levelsets.models import builtin_model

from oracles import CONE_DISC_DRIFT, COS_GRAPH_CENTRE

UNIT = Ball((0.0, 0.0), 1.0)


def test_magnify_examples():
    B = magnify(Interval(0, 1), Interval(-0.1, 1.2), 0.1)
    assert B.t_left == pytest.approx(1, abs=1e-12) and B.t_right == pytest.approx(2, abs=1e-12)
    E = magnify(Interval(0, 1), Interval(0, 1), 0.1)
    assert (E.t_left, E.t_right) == (0, 0) and m_measure(E) == 0
    R = magnify(UNIT, Ball((0, 0), 1.1), 0.1)
    np.testing.assert_allclose(R.h, 1.0, atol=1e-12)


def test_demagnify_examples():
    L = Interval(0, 1)
    assert demagnify(L, magnify(L, Interval(-0.1, 1.2), 0.1), 0.1) == Interval(-0.1, 1.2)
    assert demagnify(L, IntervalShifts(0.0, 0.0), 0.1) == L
    assert demagnify(UNIT, RadialGraph.from_function(UNIT, lambda t: 0 * t), 0.1) == UNIT


def test_demagnify_cos_graph():
    eps = 0.01
    B = RadialGraph.from_function(UNIT, np.cos)
    A, residual = demagnify(UNIT, B, eps, tol=eps, full_output=True)
    np.testing.assert_allclose(A.c, COS_GRAPH_CENTRE, atol=1e-6)
    assert A.radius == pytest.approx(1.0, abs=1e-4)
    assert 0 < residual <= eps
    # the default tolerance refuses a graph that is not exactly a circle
    with pytest.raises(NonRepresentable):
        demagnify(UNIT, B, eps)


def test_measure_examples():
    assert m_measure(IntervalShifts(1, 2)) == 3
    B = IntervalShifts(0.3, -0.7)
    assert d_metric(B, B) == 0
    R = RadialGraph.from_function(UNIT, lambda t: np.ones_like(t))
    assert m_measure(R) == pytest.approx(2 * math.pi, rel=1e-12)
    assert d_metric(R, R) == 0


def test_measure_is_segment_mass_on_disc_of_radius_r():
    L = Ball((0.0, 0.0), 0.5)
    R = RadialGraph.from_function(L, lambda t: 0.5 + np.cos(t))
    # r * int |1/2 + cos| dtheta: (2 pi/3 + sqrt 3) where positive, (sqrt 3 - pi/3) where negative
    exact = 0.5 * (2 * math.sqrt(3) + math.pi / 3)
    assert m_measure(R) == pytest.approx(exact, rel=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_interval_metric_identifies_parameters(a, b, c, d):
    B1, B2 = IntervalShifts(a, b), IntervalShifts(c, d)
    dist = d_metric(B1, B2)
    assert dist == d_metric(B2, B1)
    assert (dist == 0) == ((a, b) == (c, d))


@pytest.mark.parametrize("A", [Interval(-0.61, 0.48), Interval(-0.5, 0.5), Interval(-0.4, 0.9)])
def test_interval_round_trip(A):
    L = Interval(-0.5, 0.5)
    for eps in (0.1, 0.01):
        assert sym_diff_volume(A, demagnify(L, magnify(L, A, eps), eps)) <= 1e-9


@pytest.mark.parametrize("A", [Ball((0.02, -0.01), 1.03), Ball((-0.05, 0.04), 0.96), Ball((0.0, 0.0), 1.0)])
def test_ball_round_trip(A):
    eps = 0.05
    assert sym_diff_volume(A, demagnify(UNIT, magnify(UNIT, A, eps), eps)) <= 1e-3


def test_ellipse_round_trip():
    E = Ellipsoid.from_axes((0.01, 0.0), (1.02, 0.97), 0.3)
    back = demagnify(UNIT, magnify(UNIT, E, 0.01), 0.01, cls="ellipsoids")
    np.testing.assert_allclose(np.sort(back.axes), [0.97, 1.02], atol=1e-9)
    np.testing.assert_allclose(back.c, E.c, atol=1e-9)


def test_measure_consistency_constant_stable():
    """mu(A symdiff L)/eps - M(magnified) = O(eps) with a stable constant."""
    ks = []
    for eps in (0.1, 0.01, 0.001):
        A = Ball((0.2 * eps, 0.0), 1 + 0.5 * eps)
        ks.append(abs(sym_diff_volume(UNIT, A) / eps - m_measure(magnify(UNIT, A, eps))) / eps)
    assert max(ks) / min(ks) < 1.1
    # concentric case: the constant is pi * h^2, the quadratic Steiner term
    eps, h = 0.01, 0.5
    A = Ball((0, 0), 1 + h * eps)
    gap = sym_diff_volume(UNIT, A) / eps - m_measure(magnify(UNIT, A, eps))
    assert gap / eps == pytest.approx(steiner_data(UNIT).quadratic_coefficient * h * h, rel=1e-6)


@pytest.mark.parametrize("A_of_eps", [
    lambda e: Ball((0.3 * e, -0.2 * e), 1.0),
    lambda e: Ellipsoid.from_axes((0.1 * e, 0.0), (math.exp(0.8 * e), math.exp(-0.8 * e)), 0.4),
])
def test_volume_symmetry_for_equal_volume_perturbations(A_of_eps):
    gaps = []
    for eps in (0.1, 0.01, 0.001):
        B = magnify(UNIT, A_of_eps(eps), eps)
        gaps.append(abs(B.positive_mass() - B.negative_mass()) / eps)
    assert max(gaps) < 5.0
    assert gaps[-1] <= gaps[0] * 1.5 + 1e-6


def test_not_parallel():
    with pytest.raises(NotParallel):
        magnify(Interval(0, 1), Interval(2, 3), 0.1)
    with pytest.raises(NotParallel):
        magnify(UNIT, Ball((5, 5), 0.5), 0.1)
    with pytest.raises(NotParallel):
        magnify(Interval(0, 1), Interval(-0.1, 1.2), 1e-9, cap=1e6)


def test_incompatible_representations():
    R = RadialGraph.from_function(UNIT, np.cos, resolution=64)
    with pytest.raises(IncompatibleRepresentations):
        symdiff_measure(IntervalShifts(1, 1), R)
    with pytest.raises(IncompatibleRepresentations):
        symdiff_measure(R, RadialGraph.from_function(UNIT, np.cos, resolution=128))


def test_grid_indicator_fallback():
    edges = np.linspace(-3, 3, 6001)
    B1, B2 = IntervalShifts(1.0, -0.5), IntervalShifts(0.25, 1.5)
    g1 = to_grid(B1, edges)
    assert isinstance(g1, GridIndicator)
    assert m_measure(g1) == pytest.approx(m_measure(B1), abs=2e-3)
    assert symdiff_measure(g1, B2) == pytest.approx(symdiff_measure(B1, B2), abs=2e-3)
    R = RadialGraph.from_function(UNIT, lambda t: 1 + np.cos(t), resolution=128)
    assert m_measure(to_grid(R, edges)) == pytest.approx(m_measure(R), abs=2e-2)


def test_drift_examples():
    g = 1.7
    spec = DriftSpec(g, g)
    assert drift_D(IntervalShifts(0.0, 1.3), spec) == pytest.approx(g * 1.3 ** 2 / 2)
    assert drift_D(IntervalShifts(0.0, 0.0), spec) == 0
    tri = DriftSpec.from_model(builtin_model("triangular1d", 0.5))
    assert drift_D(IntervalShifts(1.0, 1.0), tri) == 1.0


def test_drift_uses_side_slopes():
    spec = DriftSpec(f_plus=lambda p: 2.0 if p == 0 else 3.0, f_minus=lambda p: 5.0)
    assert drift_D(IntervalShifts(1.0, -1.0), spec) == pytest.approx(2.0 / 2 + 5.0 / 2)


def test_radial_drift_closed_form():
    m = builtin_model("cone2d", 3 / (2 * math.pi))
    spec = DriftSpec.from_model(m)
    R = RadialGraph.from_function(m.oracle.body, lambda t: 0.3 * np.cos(t) + 0.2)
    assert drift_D(R, spec) == pytest.approx(CONE_DISC_DRIFT, rel=1e-10)


def test_empirical_drift_examples():
    m = builtin_model("triangular1d", 0.5)
    L = m.oracle.body
    assert empirical_drift_Dn(m, L, 1000) == 0
    t = 1.3
    for n in (10 ** 3, 10 ** 6):
        A = Interval(-0.5, 0.5 + t * n ** (-1 / 3))
        assert empirical_drift_Dn(m, A, n) == pytest.approx(t * t / 2, abs=1e-9)
    assert empirical_drift_Dn(m, Interval(-0.6, 0.7), 100) > 0


def test_empirical_drift_converges_normal():
    m = builtin_model("normal1d", 0.2)
    spec = DriftSpec.from_model(m)
    gaps = []
    for n in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6):
        A = shifted_interval(m.oracle.body, 1.0, -0.5, n ** (-1 / 3))
        gaps.append(abs(empirical_drift_Dn(m, A, n) - drift_D(IntervalShifts(1.0, -0.5), spec)))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_empirical_drift_converges_cone():
    m = builtin_model("cone2d", 3 / (2 * math.pi))
    r = m.oracle.body.radius
    gaps = []
    for n in (10 ** 3, 10 ** 4, 10 ** 5):
        e = n ** (-1 / 3)
        gaps.append(abs(empirical_drift_Dn(m, Ball((0.3 * e, 0.0), r + 0.2 * e), n) - CONE_DISC_DRIFT))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_bstar_examples():
    assert is_in_Bstar(IntervalShifts(1, -1), 0.0)
    assert not is_in_Bstar(IntervalShifts(1, 1), 1.9)
    assert is_in_Bstar(IntervalShifts(0, 0), 0.0)


def test_records_serialise():
    assert IntervalShifts(1.0, -2.0).to_record() == {"kind": "interval_shifts", "t_left": 1.0, "t_right": -2.0}
    rec = RadialGraph.from_function(UNIT, np.cos, resolution=8).to_record()
    assert rec["kind"] == "radial_graph" and len(rec["h"]) == 8
