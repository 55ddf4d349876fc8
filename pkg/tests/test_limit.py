import functools
import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from levelsets.cylinder import DriftSpec, IntervalShifts, is_in_Bstar
from levelsets.errors import InsufficientDraws, TruncationHit, ValidationError
from levelsets.geometry import Ball
from levelsets.limit import (
    NoiseField,
    PlanarGrid,
    WienerGrid,
    draw_Z_ball2d,
    draw_Z_interval,
    draw_Z_interval_constrained,
    path_argmax,
    wiener_paths_1d,
    z_distribution,
)

TRI = DriftSpec(1.0, 1.0)
LAM = 0.5


def test_overwhelming_drift_pins_argmax():
    d = draw_Z_interval(DriftSpec(1e6, 1e6), LAM, seed=3)
    assert d.functionals["shifts"] == (0.0, 0.0)
    assert d.objective >= 0


def test_free_draw_symmetric():
    dist = z_distribution(functools.partial(draw_Z_interval, TRI, LAM), 10_000, seed=11)
    t = dist.values("shift_1")
    assert abs(t.mean()) <= 3 * t.std(ddof=1) / math.sqrt(t.size)
    assert np.all(dist.values("objective") >= 0)


def test_constrained_draw_properties():
    free = z_distribution(functools.partial(draw_Z_interval, TRI, LAM), 2000, seed=5)
    bal = z_distribution(functools.partial(draw_Z_interval_constrained, TRI, LAM), 2000, seed=5)
    assert np.array_equal(bal.values("shift_0"), -bal.values("shift_1"))
    assert np.all(bal.values("objective") <= free.values("objective") + 1e-12)
    t = bal.values("shift_1")
    assert abs(t.mean()) <= 3 * t.std(ddof=1) / math.sqrt(t.size)
    for d in bal.draws[:50]:
        assert is_in_Bstar(d.argmax_set, 1e-12)


def test_argmax_invariant_under_positive_rescaling():
    grid = WienerGrid()
    paths = wiener_paths_1d(grid, np.random.default_rng(0))
    base = path_argmax(paths[1], grid.t, LAM, 1.0, 1.0)[0]
    for a in (0.5, 2.0, 10.0):
        assert path_argmax(paths[1], grid.t, LAM, 1.0, 1.0, scale=a)[0] == base


def test_larger_cmax_extends_the_same_path():
    small, big = WienerGrid(0.01, 2.0), WienerGrid(0.01, 8.0)
    ps = wiener_paths_1d(small, np.random.default_rng(9))
    pb = wiener_paths_1d(big, np.random.default_rng(9))
    K, Kb = small.n_steps, big.n_steps
    np.testing.assert_array_equal(ps, pb[:, Kb - K:Kb + K + 1])
    for s in range(50):
        a = draw_Z_interval(TRI, LAM, small, seed=s, strict=False).objective
        b = draw_Z_interval(TRI, LAM, big, seed=s, strict=False).objective
        assert b >= a


def test_variance_of_fixed_set():
    grid = WienerGrid(0.01, 3.0)
    K = grid.n_steps
    vals = np.empty(20_000)
    for i in range(vals.size):
        p = wiener_paths_1d(grid, np.random.default_rng((1, i)))
        vals[i] = p[0, K + 100] + p[1, K + 200]  # IntervalShifts(1, 2)
    var = vals.var(ddof=1)
    se = var * math.sqrt(2 / (vals.size - 1))
    assert abs(var - 3.0) <= 3 * se


def test_uniqueness_diagnostic():
    dist = z_distribution(functools.partial(draw_Z_interval, TRI, LAM), 5000, seed=2)
    assert np.mean(dist.values("ties") > 0) < 1e-3


def test_halving_step_changes_quantiles_little():
    coarse = z_distribution(functools.partial(draw_Z_interval, TRI, LAM, WienerGrid(0.01, 8.0, 2)), 10_000, seed=4)
    fine = z_distribution(functools.partial(draw_Z_interval, TRI, LAM, WienerGrid(0.005, 8.0, 1)), 10_000, seed=4)
    qc = np.quantile(coarse.values("M_total"), [0.25, 0.5, 0.75])
    qf = np.quantile(fine.values("M_total"), [0.25, 0.5, 0.75])
    assert np.all(np.abs(qc - qf) / qf < 0.01)


def test_doubling_cmax_stable():
    a = z_distribution(functools.partial(draw_Z_interval, TRI, LAM, WienerGrid(0.01, 4.0)), 10_000, seed=8)
    b = z_distribution(functools.partial(draw_Z_interval, TRI, LAM, WienerGrid(0.01, 8.0)), 10_000, seed=8)
    assert ks_2samp(a.values("M_total"), b.values("M_total")).statistic <= 0.02


def test_truncation_hit_reports_index():
    op = functools.partial(draw_Z_interval, DriftSpec(1e-4, 1e-4), LAM, WienerGrid(0.01, 0.2))
    with pytest.raises(TruncationHit) as info:
        z_distribution(op, 20, seed=0)
    assert info.value.index is not None


def test_z_distribution_identity_and_determinism():
    op = functools.partial(draw_Z_interval, TRI, LAM)
    single = z_distribution(op, 1, seed=6)
    direct = draw_Z_interval(TRI, LAM, seed=(6, 0))
    assert single.draws[0].functionals == direct.functionals
    assert z_distribution(op, 50, seed=6).to_csv() == z_distribution(op, 50, seed=6).to_csv()
    with pytest.raises(InsufficientDraws):
        z_distribution(op, 0)


def test_workers_do_not_change_results():
    op = functools.partial(draw_Z_interval, TRI, LAM)
    assert z_distribution(op, 40, seed=1, workers=1).to_csv() == z_distribution(op, 40, seed=1, workers=2).to_csv()


def test_csv_layout():
    text = z_distribution(functools.partial(draw_Z_interval, TRI, LAM), 2, seed=0).to_csv()
    lines = text.splitlines()
    assert lines[0] == "draw_index,functional,value"
    assert lines[1].startswith("0,objective,")


def test_invalid_parameters():
    with pytest.raises(ValidationError):
        draw_Z_interval(TRI, 0.0)
    with pytest.raises(ValidationError):
        draw_Z_interval(DriftSpec(0.0, 1.0), LAM)
    with pytest.raises(ValidationError):
        WienerGrid(step=0.0)


# ---------------------------------------------------------------- planar

DISC = Ball((0.0, 0.0), 0.5)
CONE = DriftSpec(3 / math.pi, 3 / math.pi)
CONE_LAM = 3 / (2 * math.pi)
SMALL = PlanarGrid(resolution=64, step=0.05, c_max=5.0, lattice=21)


def test_planar_draw_basic():
    d = draw_Z_ball2d(CONE, CONE_LAM, DISC, SMALL, seed=0)
    assert d.objective >= 0
    c = draw_Z_ball2d(CONE, CONE_LAM, DISC, SMALL, seed=0, constrained=True)
    assert c.objective <= d.objective + 1e-12
    assert abs(c.functionals["M_plus"] - c.functionals["M_minus"]) <= SMALL.step * 2 * math.pi * 0.5 / SMALL.resolution


def test_planar_overwhelming_drift():
    d = draw_Z_ball2d(DriftSpec(1e6, 1e6), CONE_LAM, DISC, SMALL, seed=1)
    assert np.max(np.abs(d.functionals["shifts"])) < 1e-3


def test_planar_field_variance():
    # a radial graph sitting on cell edges: W is a sum of whole cells
    g = PlanarGrid(resolution=32, step=0.1, c_max=2.0)
    h = np.where(np.arange(32) < 16, 0.5, -0.3)
    vals = np.array([NoiseField(DISC, g, np.random.default_rng((2, i))).W(h)[0] for i in range(4000)])
    M = 0.5 * (2 * math.pi / 32) * (16 * 0.5 + 16 * 0.3)
    se = vals.var(ddof=1) * math.sqrt(2 / (vals.size - 1))
    assert abs(vals.var(ddof=1) - M) <= 3 * se
