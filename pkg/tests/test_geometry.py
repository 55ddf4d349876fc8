import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levelsets.errors import DegenerateBody, DimensionMismatch, EpsTooLarge, SkeletonPoint, UnsupportedBody
from levelsets.geometry import (
    Ball,
    Ellipsoid,
    Interval,
    Square,
    hausdorff_distance,
    isoperimetric_gap,
    parallel_set_volume,
    project,
    steiner_data,
    sym_diff_volume,
    sym_diff_volume_qmc,
)

from oracles import ELLIPSE_INTERIOR_DISTANCE, ELLIPSE_PROJECTION


def test_project_interval():
    p = project(Interval(0, 1), 1.3)
    assert p.pi[0] == 1 and p.u[0] == 1 and p.s == pytest.approx(0.3, abs=1e-15)


def test_project_ball():
    p = project(Ball((0, 0), 1), [1.2, 0])
    np.testing.assert_allclose(p.pi, [1, 0], atol=1e-15)
    np.testing.assert_allclose(p.u, [1, 0], atol=1e-15)
    assert p.s == pytest.approx(0.2, abs=1e-15)


def test_project_ellipse_against_dense_boundary():
    E = Ellipsoid((0, 0), np.diag([4.0, 1.0]))
    p = project(E, [3.0, 0.0])
    np.testing.assert_allclose(p.pi, ELLIPSE_PROJECTION["pi"], atol=1e-12)
    assert p.s == pytest.approx(ELLIPSE_PROJECTION["s"], abs=1e-12)
    q = project(E, [0.5, 0.5])
    assert q.s == pytest.approx(-ELLIPSE_INTERIOR_DISTANCE, abs=1e-9)


def test_skeleton_and_degenerate():
    with pytest.raises(SkeletonPoint):
        project(Interval(0, 2), 1.0)
    with pytest.raises(SkeletonPoint):
        project(Ball((1, 1), 2), [1, 1])
    with pytest.raises(SkeletonPoint):
        project(Ellipsoid.from_axes((0, 0), (2, 1)), [0.0, 0.0])
    with pytest.raises(DegenerateBody):
        project(Interval(0.5, 0.5), 0.5)
    # a point interval still projects by side
    assert project(Interval(0.5, 0.5), 0.7).s == pytest.approx(0.2)


@pytest.mark.parametrize("body", [
    Interval(-0.3, 1.7),
    Ball((0.2, -0.1), 1.3),
    Ellipsoid.from_axes((0.1, 0.4), (2.0, 0.7), 0.6),
    Ellipsoid.from_axes((0.0, 0.0), (1.0, 0.999), 1.1),
])
def test_projection_round_trip_and_sign(body):
    rng = np.random.default_rng(0)
    d = body.dimension
    x = rng.uniform(-3, 3, size=(10_000, d)) if d > 1 else rng.uniform(-3, 3, size=(10_000, 1))
    p = project(body, x)
    recon = p.pi + np.asarray(p.s)[:, None] * p.u
    assert np.max(np.abs(recon - x)) <= 1e-10
    assert np.max(np.abs(np.linalg.norm(p.u, axis=1) - 1)) <= 1e-12
    inside = body.contains(x if d > 1 else x[:, 0])
    assert np.array_equal(np.asarray(p.s) > 0, ~inside)


def test_hausdorff_examples():
    assert hausdorff_distance(Interval(0, 1), Interval(0.1, 1.2)) == pytest.approx(0.2)
    assert hausdorff_distance(Ball((0, 0), 1), Ball((0, 0), 1.3)) == pytest.approx(0.3)
    E = Ellipsoid.from_axes((0, 0), (2, 1), 0.3)
    assert hausdorff_distance(E, E) == 0
    with pytest.raises(DimensionMismatch):
        hausdorff_distance(Interval(0, 1), Ball((0, 0), 1))


def test_hausdorff_ellipse_grid_close_to_exact():
    # concentric scaled axis-aligned ellipses: the gap is largest along the major axis
    a = Ellipsoid.from_axes((0, 0), (2.0, 1.0))
    b = Ellipsoid.from_axes((0, 0), (2.2, 1.1))
    assert hausdorff_distance(a, b) == pytest.approx(0.2, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=6, max_size=6))
def test_hausdorff_interval_metric_axioms(ends):
    A, B, C = (Interval(min(ends[i], ends[i + 1]), max(ends[i], ends[i + 1])) for i in (0, 2, 4))
    dab, dbc, dac = hausdorff_distance(A, B), hausdorff_distance(B, C), hausdorff_distance(A, C)
    assert dab == hausdorff_distance(B, A)
    assert hausdorff_distance(A, A) == 0
    assert dac <= dab + dbc
    assert (dab == 0) == (A == B)


def test_sym_diff_examples():
    assert sym_diff_volume(Interval(0, 1), Interval(0.5, 1.5)) == pytest.approx(1.0)
    assert sym_diff_volume(Ball((0, 0), 1), Ball((0, 0), 1)) == 0
    assert sym_diff_volume(Ball((0, 0), 1), Ball((0, 0), 1.1)) == pytest.approx(0.21 * math.pi, rel=1e-12)


def test_sym_diff_identity_and_symmetry():
    bodies = [Interval(0.1, 0.9), Ball((0.1, 0.2), 0.8), Ellipsoid.from_axes((0.0, 0.1), (1.2, 0.5), 0.4)]
    for A in bodies:
        assert sym_diff_volume(A, A) == 0
    pairs = [(Interval(0, 1), Interval(0.3, 2)), (Ball((0, 0), 1), Ball((0.4, 0.1), 0.7)),
             (Ellipsoid.from_axes((0, 0), (1.0, 0.5)), Ellipsoid.from_axes((0.2, 0), (0.8, 0.6), 0.3))]
    for A, B in pairs:
        assert sym_diff_volume(A, B) == pytest.approx(sym_diff_volume(B, A), rel=5e-3)


def test_lens_against_qmc():
    A, B = Ball((0, 0), 1.0), Ball((0.5, 0.2), 0.8)
    est, se = sym_diff_volume_qmc(A, B)
    assert abs(est - sym_diff_volume(A, B)) <= 4 * se + 1e-4


def test_qmc_relative_error_target():
    a, b = Ellipsoid.from_axes((0, 0), (2.0, 1.0)), Ellipsoid.from_axes((0, 0), (2.2, 1.1))
    est, se = sym_diff_volume_qmc(a, b)
    exact = math.pi * (2.2 * 1.1 - 2.0)
    assert se / est <= 1e-3
    assert abs(est - exact) <= 4 * se
    # reproducible bit for bit
    assert sym_diff_volume_qmc(a, b) == (est, se)


def test_parallel_set_examples():
    assert parallel_set_volume(Ball((0, 0), 1), 0.1) == pytest.approx(0.21 * math.pi, rel=1e-14)
    assert parallel_set_volume(Interval(0, 1), 0.1, "both") == pytest.approx(0.4)
    assert parallel_set_volume(Ball((0, 0), 1), 0.1, "both") == pytest.approx(0.4 * math.pi, rel=1e-14)
    with pytest.raises(EpsTooLarge):
        parallel_set_volume(Ball((0, 0), 1), 1.0, "inner")


def test_steiner_examples():
    d = steiner_data(Interval(0, 1))
    assert d.surface_measure == 2 and d.inner_reach(0) == 0.5 and d.inner_reach(1) == 0.5
    d = steiner_data(Ball((0, 0), 1))
    assert d.surface_measure == pytest.approx(2 * math.pi) and d.quadratic_coefficient == pytest.approx(math.pi)
    assert steiner_data(Ball((0, 0), 2)).surface_measure == pytest.approx(4 * math.pi)
    with pytest.raises(UnsupportedBody):
        steiner_data(Ellipsoid.from_axes((0, 0), (2, 1)))


@pytest.mark.parametrize("eps", [0.01, 0.1, 0.5])
@pytest.mark.parametrize("body", [Ball((0, 0), 1.0), Ball((1, 2), 2.5), Square((0, 0), 1.0), Interval(0, 3)])
def test_steiner_consistency_machine_precision(body, eps):
    direct = parallel_set_volume(body, eps)
    assert abs(direct - steiner_data(body).outer_shell_volume(eps)) <= 4 * np.finfo(float).eps * direct


def test_isoperimetric():
    assert isoperimetric_gap(Ball((0, 0), 1.7)) == pytest.approx(0.0, abs=1e-12)
    assert isoperimetric_gap(Square((0, 0), 1.0)) > 0


def test_square_inner_reach():
    r = steiner_data(Square((0, 0), 2.0)).inner_reach
    assert r(0.5) == 1.0 and r(1.0) == 0.0 and r(2.25) == 0.5
