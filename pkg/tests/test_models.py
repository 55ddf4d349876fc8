import math

import numpy as np
import pytest
from scipy import stats

from levelsets.errors import LambdaOutOfRange, UnknownModel
from levelsets.geometry import Ball, Ellipsoid, Interval
from levelsets.models import (
    MODELS,
    boundary_derivative,
    builtin_model,
    excess_mass_of,
    identifiability_certificate,
    local_excess,
    probability,
    probability_symdiff,
    sample,
)

from oracles import PHI_1, TRIANGULAR

LEVELS = {"triangular1d": 0.5, "normal1d": 0.2, "epanechnikov1d": 0.4, "cone2d": 3 / (2 * math.pi),
          "gaussian2d": 0.08}


def test_triangular_oracle():
    m = builtin_model("triangular1d", 0.5)
    o = m.oracle
    assert o.body == Interval(-0.5, 0.5)
    assert (o.p_lambda, o.v_lambda, o.e_lambda) == (TRIANGULAR["p"], TRIANGULAR["v"], TRIANGULAR["e"])
    assert boundary_derivative(m, "plus", 0) == 1 and boundary_derivative(m, "minus", 1) == 1


def test_cone_and_normal_oracles():
    assert builtin_model("cone2d", 3 / (2 * math.pi)).oracle.body.radius == pytest.approx(0.5, abs=1e-12)
    m = builtin_model("normal1d", PHI_1)
    assert m.oracle.body.a == pytest.approx(-1, abs=1e-12) and m.oracle.body.b == pytest.approx(1, abs=1e-12)
    assert boundary_derivative(m, "plus", 1) == pytest.approx(PHI_1, rel=1e-12)
    assert boundary_derivative(builtin_model("cone2d", 0.5), "minus", 2.0) == pytest.approx(3 / math.pi)


def test_excess_mass_examples():
    m = builtin_model("triangular1d", 0.5)
    assert excess_mass_of(m, m.oracle.body) == pytest.approx(0.25, abs=1e-12)
    assert excess_mass_of(m, Interval(-1, 1)) == pytest.approx(0.0, abs=1e-12)
    assert excess_mass_of(m, Interval(0, 0.5)) == pytest.approx(0.125, abs=1e-12)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_oracle_consistency(name):
    m = builtin_model(name, LEVELS[name])
    o = m.oracle
    assert excess_mass_of(m, o.body) == pytest.approx(o.e_lambda, abs=1e-8)
    assert o.e_lambda == pytest.approx(o.p_lambda - o.lam * o.v_lambda, abs=1e-14)
    assert 0 < o.p_lambda < 1 and 0 < o.v_lambda < 1 / o.lam and o.e_lambda > 0
    assert probability(m, o.body) == pytest.approx(o.p_lambda, abs=1e-8)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_maximality_under_perturbation(name):
    m = builtin_model(name, LEVELS[name])
    o = m.oracle
    rng = np.random.default_rng(3)
    for _ in range(100):
        if m.dimension == 1:
            da, db = rng.uniform(-0.3, 0.3, 2)
            A = Interval(o.body.a + da, o.body.b + db)
        else:
            dx, dy, dr = rng.uniform(-0.3, 0.3, 3) * o.body.radius
            A = Ball((dx, dy), o.body.radius + dr)
        assert excess_mass_of(m, A) <= o.e_lambda + 1e-9


def test_lambda_and_name_validation():
    with pytest.raises(LambdaOutOfRange):
        builtin_model("triangular1d", 0.0)
    with pytest.raises(LambdaOutOfRange):
        builtin_model("triangular1d", 1.0)
    with pytest.raises(UnknownModel):
        builtin_model("uniform", 0.5)


def test_sampling_deterministic():
    m = builtin_model("triangular1d", 0.5)
    assert np.array_equal(sample(m, 5, 7), sample(m, 5, 7))
    assert not np.array_equal(sample(m, 5, 7), sample(m, 5, 8))


def test_triangular_sampler_ks():
    m = builtin_model("triangular1d", 0.5)
    cdf = lambda x: np.where(x < 0, (1 + x) ** 2 / 2, 1 - (1 - x) ** 2 / 2)  # noqa: E731
    n = 100_000
    passes = sum(stats.kstest(m.sample(n, s), cdf).statistic < 1.63 / math.sqrt(n) for s in range(100))
    assert passes >= 98


@pytest.mark.parametrize("name", ["normal1d", "epanechnikov1d"])
def test_other_1d_samplers(name):
    m = builtin_model(name, LEVELS[name])
    x = m.sample(200_000, 1)
    inside = np.mean((x >= m.oracle.body.a) & (x <= m.oracle.body.b))
    p = m.oracle.p_lambda
    assert abs(inside - p) <= 4 * math.sqrt(p * (1 - p) / x.size)


@pytest.mark.parametrize("name", ["cone2d", "gaussian2d"])
def test_planar_sampler_mass(name):
    m = builtin_model(name, LEVELS[name])
    n = 200_000
    x = m.sample(n, 11)
    inside = m.oracle.body.contains(x).mean()
    p = m.oracle.p_lambda
    assert abs(inside - p) <= 3 * math.sqrt(p * (1 - p) / n) + 1e-12 or abs(inside - p) <= 4 * math.sqrt(p * (1 - p) / n)


@pytest.mark.parametrize("name, body", [
    ("cone2d", Ball((0.1, -0.2), 0.45)),
    ("cone2d", Ellipsoid.from_axes((0.2, 0.1), (0.7, 0.3), 0.5)),
    ("gaussian2d", Ellipsoid.from_axes((-0.3, 0.2), (1.5, 0.6), 1.0)),
    ("triangular1d", Interval(-0.2, 0.7)),
])
def test_quadrature_vs_monte_carlo(name, body):
    m = builtin_model(name, LEVELS[name])
    n = 1_000_000
    x = m.sample(n, 5)
    inside = body.contains(x).mean()
    p = probability(m, body)
    assert abs(inside - p) <= 4 * math.sqrt(p * (1 - p) / n)
    L = m.oracle.body
    in_sd = (body.contains(x) != L.contains(x)).mean()
    q = probability_symdiff(m, body)
    assert abs(in_sd - q) <= 4 * math.sqrt(q * (1 - q) / n)


@pytest.mark.parametrize("name, body", [
    ("triangular1d", Interval(-0.55, 0.45)),
    ("normal1d", Interval(-2.5, 0.1)),
    ("cone2d", Ball((0.05, 0.0), 0.47)),
])
def test_local_excess_signs_and_sum(name, body):
    m = builtin_model(name, LEVELS[name])
    inner, outer = local_excess(m, body)
    assert inner >= 0 >= outer
    # e(L) - e(A) = e(L \ A) - e(A \ L)
    assert inner - outer == pytest.approx(m.oracle.e_lambda - excess_mass_of(m, body), abs=1e-7)


def test_identifiability_certificate_positive():
    assert identifiability_certificate(builtin_model("triangular1d", 0.5)) > 0
