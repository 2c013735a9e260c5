import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rinfer.assignment import AssignmentDraw, MechanismSpec, as_indices, enumerate_draws
from rinfer.panel import PanelError, UnitAverages, unit_averages, window
from rinfer.statistics import (
    StatisticConfig,
    StatisticValue,
    combine,
    contrast_table,
    detrend,
    diff_in_means,
    stats_from_indices,
)

import oracles
from conftest import make_panel, poisson_panel


def avgs(treated, control):
    t, c = np.asarray(treated, float), np.asarray(control, float)
    ones = np.ones_like(t, dtype=int)
    return UnitAverages(tau=1, treated_mean=t, control_mean=c, treated_count=ones, control_count=ones)


def test_diff_in_means_examples():
    assert diff_in_means(avgs([3, 6], [1, 2])).value == 3.0
    p = make_panel(np.full((3, 8), 4.2))
    a = unit_averages(window(p, 5, 4), AssignmentDraw("tr", (1, 0, 1)))
    assert diff_in_means(a).value == 0.0


def test_statistic_value_rejects_nan():
    with pytest.raises(ValueError):
        StatisticValue(float("nan"), 1)
    with pytest.raises(ValueError):
        StatisticConfig("ranks")


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**31), st.data())
def test_contrast_table_matches_oracle(n, tau, seed, data):
    slab = np.random.default_rng(seed).normal(size=(n, 2 * tau))
    support = tuple(range(-tau + 1, tau))
    for kind, opts in (("tr", (0, 1)), ("at", support)):
        spec = MechanismSpec(kind, None if kind == "tr" else opts)
        C = contrast_table(slab, tau, spec)
        rows = oracles.treatment_rows(kind, opts, tau)
        combo = data.draw(st.lists(st.integers(0, len(opts) - 1), min_size=n, max_size=n))
        D = np.array([rows[k] for k in combo])
        got = stats_from_indices(C, np.array(combo))[0]
        assert got == pytest.approx(oracles.statistic(slab, D), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**31))
def test_identity_with_unit_averages(n, tau, seed):
    p = poisson_panel(n, 2 * tau + 3, seed=seed)
    v = window(p, tau + 2, tau)
    spec = MechanismSpec("at", tuple(range(-tau + 1, tau)))
    rng = np.random.default_rng(seed)
    draw = AssignmentDraw("at", tuple(int(x) for x in rng.choice(spec.options, n)))
    a = unit_averages(v, draw)
    per_unit = np.mean(a.treated_mean - a.control_mean)
    C = contrast_table(np.asarray(v.slab, float), tau, spec)
    assert diff_in_means(a).value == pytest.approx(per_unit, abs=1e-12)
    assert stats_from_indices(C, as_indices(spec, draw))[0] == pytest.approx(per_unit, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 10), st.integers(0, 2**31))
def test_tr_antisymmetry(n, tau, seed):
    rng = np.random.default_rng(seed)
    C = contrast_table(rng.normal(size=(n, 2 * tau)) * 10, tau, MechanismSpec("tr"))
    bits = rng.integers(0, 2, (5, n))
    np.testing.assert_array_equal(stats_from_indices(C, 1 - bits), -stats_from_indices(C, bits))


def test_detrend_exact_linear():
    t = np.arange(1, 101)
    alpha, beta = np.array([3.0, -1.0, 50.0]), np.array([0.2, 1.5, -0.7])
    y = alpha[:, None] + beta[:, None] * t[None, :]
    resid, fit = detrend(make_panel(y), 50, halfwidth=40)
    assert np.abs(resid.outcomes).max() <= 1e-9 * np.abs(y).max()
    np.testing.assert_allclose(fit.slopes, beta, rtol=1e-10)
    assert fit.fit_periods == (10, 89) and resid.T == 80
    assert resid.metadata["detrended"] and resid.metadata["detrend_anchor"] == 41


def test_detrend_common_trend_absorbed():
    rng = np.random.default_rng(1)
    y = rng.poisson(5, (4, 120)).astype(float)
    t = np.arange(1, 121)
    r0, _ = detrend(make_panel(y), 60, 30)
    r1, _ = detrend(make_panel(y + 0.8 * t), 60, 30)
    assert np.abs(r1.outcomes - r0.outcomes).max() <= 1e-9 * np.abs(y + 0.8 * t).max()


def test_detrend_residuals_sum_to_zero():
    y = np.random.default_rng(2).poisson(5, (6, 80)).astype(float)
    r, _ = detrend(make_panel(y), 40, 20)
    assert np.abs(r.outcomes.sum(axis=1)).max() <= 1e-8 * np.abs(y).max() * 40


def test_detrend_preonly_and_clipping():
    y = np.random.default_rng(3).normal(size=(2, 50))
    r, fit = detrend(make_panel(y), 30, 10, preonly=True)
    assert fit.fit_periods == (20, 29) and fit.residual_periods == (20, 39)
    pre = r.outcomes[:, :10]
    assert np.abs(pre.sum(axis=1)).max() < 1e-10
    with pytest.warns(UserWarning, match="clipped"):
        detrend(make_panel(y), 30, 300)
    with pytest.raises(PanelError):
        detrend(make_panel(y), 30, 1)
    with pytest.raises(PanelError, match="at least 3"), pytest.warns(UserWarning):
        detrend(make_panel(y), 2, 5, preonly=True)


def test_combine_examples():
    assert combine([2.0], np.array([-1.0, 0.0, 1.0]), "hotelling") == pytest.approx(4.0)
    s = [1, -3, 2]
    assert combine(s, None, "max") == 3
    assert combine(s, None, "mean") == 0
    with pytest.raises(ValueError, match="degenerate reference distribution"):
        combine([1.0], np.zeros((10, 1)), "hotelling")
    with pytest.raises(ValueError):
        combine([1.0, 2.0], np.ones((3, 2)), "hotelling")
    with pytest.raises(ValueError):
        combine([1.0], None, "median")


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_hotelling_scale_invariant(L, seed, k):
    rng = np.random.default_rng(seed)
    ref = rng.normal(size=(50, L)) @ rng.normal(size=(L, L))
    s = rng.normal(size=L)
    a = combine(s, ref, "hotelling")
    b = combine(k * s, k * ref, "hotelling")
    assert b == pytest.approx(a, rel=1e-7)


def test_hotelling_collinear_uses_pseudo_inverse():
    x = np.random.default_rng(0).normal(size=(200, 1))
    ref = np.hstack([x, 2 * x])
    got = combine([1.0, 2.0], ref, "hotelling")
    single = combine([1.0], x, "hotelling")
    assert got == pytest.approx(single, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(-100, 100))
def test_max_mean_coincide_for_L1(s):
    assert combine([s], None, "max") == combine([s], None, "mean")


def test_enumerated_statistics_match_oracle():
    p = poisson_panel(4, 10, seed=8)
    v = window(p, 6, 3)
    slab = np.asarray(v.slab, float)
    spec = MechanismSpec("at", (-2, -1, 0, 1))
    C = contrast_table(slab, 3, spec)
    rows = oracles.treatment_rows("at", spec.options, 3)
    for d in enumerate_draws(spec, 4):
        idx = as_indices(spec, d)
        D = np.array([rows[k] for k in idx])
        assert stats_from_indices(C, idx)[0] == pytest.approx(oracles.statistic(slab, D), abs=1e-12)
