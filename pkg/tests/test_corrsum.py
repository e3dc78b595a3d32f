import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entscale.corrsum import (CurveFamily, EpsGrid, PairCountConfig, analyze,
                              conditional_entropy_curves, correlation_sum,
                              correlation_sum_naive, delta_h_curves, dimension_curve,
                              entropy_curves, excess_entropy_curves, half_data_error)
from entscale.errors import (EmptyGrid, GridTooSmall, MissingOrder, TooFewPoints,
                             UsageError)
from entscale.series import EmbeddingSpec, PointCloud, ScalarSeries, delay_embed


def cloud1d(values):
    v = np.asarray(values, dtype=float)
    return PointCloud(v[:, None], np.arange(v.size))


def family(q, orders, grid, values):
    return CurveFamily(q, orders, grid, values)


# -- grid -------------------------------------------------------------------

def test_grid_validation():
    g = EpsGrid.geometric(0.01, 10, 31)
    assert len(g) == 31
    assert math.isclose(g.log_step, math.log(1000) / 30)
    with pytest.raises((EmptyGrid, UsageError)):
        EpsGrid([])
    with pytest.raises(UsageError):
        EpsGrid([1.0, 2.0, 5.0])
    with pytest.raises(UsageError):
        EpsGrid([2.0, 1.0])


# -- correlation sums ---------------------------------------------------------

def test_two_points():
    c = correlation_sum(cloud1d([0, 3]), [1, 2, 4])
    assert list(c.row(1)) == [0, 0, 1]


def test_three_points():
    c = correlation_sum(cloud1d([0, 1, 2]), [1.5])
    assert c.row(1)[0] == pytest.approx(2 / 3, abs=0)


def test_strict_inequality():
    # distance exactly equal to eps is not counted
    c = correlation_sum(cloud1d([0.0, 1.0]), [1.0, 2.0])
    assert list(c.row(1)) == [0, 1]


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        correlation_sum(cloud1d([0, 1]), [1.0], PairCountConfig(theiler=1))


def _random_cloud(rng, n, m, tau=1):
    return delay_embed(ScalarSeries(rng.standard_normal(n + (m - 1) * tau)), EmbeddingSpec(m, tau))


@pytest.mark.parametrize("theiler", [0, 3])
def test_box_counting_equals_naive_random(theiler):
    rng = np.random.default_rng(5)
    cloud = _random_cloud(rng, 5000, 4)
    grid = EpsGrid.geometric(0.01, 5, 25)
    cfg = PairCountConfig(theiler=theiler)
    fast = correlation_sum(cloud, grid, cfg, exact=True)
    slow = correlation_sum_naive(cloud, grid, cfg)
    assert np.array_equal(fast.counts, slow.counts)
    assert np.array_equal(fast.values, slow.values)


def test_box_counting_equals_naive_lorenz():
    from entscale.models import LorenzParams, lorenz_generate
    x, _, _ = lorenz_generate(LorenzParams(n_samples=5000 + 40))
    cloud = delay_embed(x, EmbeddingSpec(5, 10))
    cloud = PointCloud(cloud.points[:5000], cloud.origin_indices[:5000])
    grid = EpsGrid.for_series(x, 30)
    cfg = PairCountConfig(theiler=10)
    fast = correlation_sum(cloud, grid, cfg, exact=True)
    slow = correlation_sum_naive(cloud, grid, cfg)
    assert np.array_equal(fast.counts, slow.counts)
    assert np.array_equal(fast.values, slow.values)


def test_sampled_mode_close_to_exact():
    rng = np.random.default_rng(8)
    cloud = _random_cloud(rng, 20_000, 2)
    grid = EpsGrid.geometric(0.05, 2, 8)
    exact = correlation_sum(cloud, grid, exact=True)
    sampled = correlation_sum(cloud, grid, PairCountConfig(min_refs=2000), exact=False)
    assert not sampled.meta["exact"]
    np.testing.assert_allclose(sampled.values, exact.values, rtol=0.05)


@settings(max_examples=1000, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(5, 60), m=st.integers(1, 4),
       tau=st.integers(1, 3), theiler=st.integers(0, 3))
def test_monotone_and_nested(seed, n, m, tau, theiler):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(n + (m - 1) * tau)
    cloud = delay_embed(ScalarSeries(y), EmbeddingSpec(m, tau))
    cfg = PairCountConfig(theiler=theiler)
    if cloud.origin_indices[-1] - cloud.origin_indices[0] <= theiler:
        return
    c = correlation_sum(cloud, EpsGrid.geometric(0.05, 5, 12), cfg).values
    assert np.all((c >= 0) & (c <= 1))
    assert np.all(np.diff(c, axis=1) >= 0)
    assert np.all(np.diff(c, axis=0) <= 0)


def test_uniform_closed_form():
    rng = np.random.default_rng(3)
    s = ScalarSeries(rng.random(10_000))
    grid = EpsGrid.geometric(0.01, 0.5, 10)
    H = entropy_curves(correlation_sum(delay_embed(s, EmbeddingSpec(1)), grid))
    expected = -np.log(2 * grid.values - grid.values ** 2)
    np.testing.assert_allclose(H.row(1), expected, atol=0.02)


def test_gaussian_stochastic_scaling():
    # slope of H_m against -ln eps equals m for iid data
    rng = np.random.default_rng(11)
    s = ScalarSeries(rng.standard_normal(100_000))
    grid = EpsGrid.geometric(0.01, 0.1, 11)
    cs = analyze(s, 3, 1, grid)
    x = -np.log(grid.values)
    for m in (1, 2, 3):
        slope = np.polyfit(x, cs.H2.row(m), 1)[0]
        assert slope == pytest.approx(m, rel=0.05)


# -- curve operations -----------------------------------------------------------

def test_entropy_values():
    c2 = family("C2", [1, 2], [1.0, 2.0], [[1.0, 1.0], [math.exp(-2), 0.0]])
    H = entropy_curves(c2)
    assert H.row(1)[0] == 0
    assert H.row(2)[0] == pytest.approx(2.0, abs=1e-15)
    assert np.isnan(H.row(2)[1])


def test_conditional_and_delta():
    H = family("H2", [1, 2], [1.0], [[2.0], [3.0]])
    h = conditional_entropy_curves(H)
    assert h.orders == (0, 1)
    assert h.row(0)[0] == 2.0 and h.row(1)[0] == 1.0
    dh = delta_h_curves(family("h2", [0, 1], [1.0], [[3.0], [2.0]]))
    assert dh.row(1)[0] == 1.0
    with pytest.raises(MissingOrder):
        conditional_entropy_curves(H, orders=[2])
    with pytest.raises(MissingOrder):
        delta_h_curves(h, orders=[3])


def test_dimension_curve():
    g = EpsGrid.geometric(0.01, 1, 9).values
    D = dimension_curve(family("C2", [1], g, [g ** 2]))
    np.testing.assert_allclose(D.row(1)[:-1], 2.0, rtol=1e-12)
    assert np.isnan(D.row(1)[-1])
    D0 = dimension_curve(family("C2", [1], g, [np.full(g.size, 0.3)]), delta_steps=3)
    assert np.all(D0.row(1)[:-3] == 0)
    with pytest.raises(GridTooSmall):
        dimension_curve(family("C2", [1], g[:2], [g[:2]]), delta_steps=2)


def test_excess_entropy_identity_and_m1():
    rng = np.random.default_rng(0)
    H = np.cumsum(rng.random((6, 7)) * 3, axis=0)
    H2 = family("H2", range(1, 7), EpsGrid.geometric(0.1, 1, 7).values, H)
    h2 = conditional_entropy_curves(H2)
    E = excess_entropy_curves(H2, h2)
    assert np.all(E.row(1) == 0)
    dh = delta_h_curves(h2)
    for m in range(2, 7):
        alt = sum(k * dh.row(k) for k in range(1, m))
        assert np.max(np.abs(E.row(m) - alt)) < 1e-9


def test_iid_curves_near_zero():
    rng = np.random.default_rng(2)
    s = ScalarSeries(rng.random(20_000))
    cs = analyze(s, 4, 1, EpsGrid.geometric(0.05, 0.5, 8))
    assert np.nanmax(np.abs(cs.E2.values)) < 0.05
    assert np.nanmax(np.abs(cs.deltaH.values)) < 0.03
    for m in (1, 2):
        np.testing.assert_allclose(cs.h2.row(m), cs.h2.row(0), atol=0.03)


def test_half_data():
    rng = np.random.default_rng(4)
    cloud = _random_cloud(rng, 4, 1)
    half = half_data_error(correlation_sum, cloud, [10.0])
    assert half.row(1)[0] == 1.0
    big = _random_cloud(rng, 4000, 2)
    a = half_data_error(correlation_sum, big, [0.5])
    b = half_data_error(correlation_sum, big, [0.5])
    assert np.array_equal(a.values, b.values)
    full = correlation_sum(big, [0.5])
    assert abs(a.row(1)[0] - full.row(1)[0]) < 0.02
    with pytest.raises(TooFewPoints):
        half_data_error(correlation_sum, _random_cloud(rng, 3, 1), [1.0])


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    cs = analyze(ScalarSeries(rng.standard_normal(2000)), 3, 1, EpsGrid.geometric(0.01, 1, 6))
    p = tmp_path / "H2.csv"
    cs.H2.to_csv(p, header=["hello"])
    back = CurveFamily.from_csv(p)
    assert back.quantity == "H2"
    assert back.orders == cs.H2.orders
    np.testing.assert_array_equal(back.values, cs.H2.values)
    np.testing.assert_array_equal(back.counts, cs.H2.counts)
