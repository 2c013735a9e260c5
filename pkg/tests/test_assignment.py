
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rinfer.assignment import (
    AssignmentDraw,
    AssignmentError,
    MechanismSpec,
    draw_indices,
    enumerate_draws,
    enumerate_indices,
    expand,
    factual_draw,
    parse_mechanisms,
    sample_draw,
)
from rinfer.panel import window

from conftest import make_panel


def view(tau, n=1):
    return window(make_panel(np.zeros((n, 2 * tau + 2))), tau + 1, tau)


def test_factual_draws():
    assert factual_draw(MechanismSpec("tr"), 3).values == (1, 1, 1)
    assert factual_draw(MechanismSpec("at", (-2, -1, 0)), 2).values == (0, 0)
    with pytest.raises(AssignmentError, match="excludes offset 0"):
        factual_draw(MechanismSpec("at", (-2, -1)), 2)


def test_spec_validation():
    with pytest.raises(AssignmentError):
        MechanismSpec("xx")
    with pytest.raises(AssignmentError):
        MechanismSpec("tr", (0,))
    with pytest.raises(AssignmentError):
        MechanismSpec("at", ())
    with pytest.raises(AssignmentError):
        MechanismSpec("at", (0,), 2)
    assert MechanismSpec("AT", (0, -2, -1, 0)).support == (-2, -1, 0)


def test_for_tau_bounds():
    assert MechanismSpec("at").for_tau(7).support == tuple(range(-6, 1))
    assert MechanismSpec("at", backdate=2).for_tau(7).support == (-2, -1, 0)
    assert MechanismSpec("at", (-6, -3, 0)).for_tau(7).support == (-6, -3, 0)
    with pytest.raises(AssignmentError, match="outside"):
        MechanismSpec("at", (-3, 0)).for_tau(3)
    with pytest.raises(AssignmentError):
        MechanismSpec("at", backdate=3).for_tau(3)
    with pytest.warns(UserWarning, match=r"\+3"):
        s = MechanismSpec("at", (0, 1, 3)).for_tau(3)
    assert s.support == (0, 1)
    assert MechanismSpec("at").cannot_vary(1)
    assert not MechanismSpec("at").cannot_vary(2)
    assert not MechanismSpec("tr").cannot_vary(1)


def test_spec_dict_round_trip():
    for s in (MechanismSpec("tr"), MechanismSpec("at", (-1, 0)), MechanismSpec("at", backdate=4)):
        assert MechanismSpec.from_dict(s.to_dict()) == s


def test_parse_mechanisms():
    tr, at = parse_mechanisms("tr,at", backdate=6)
    assert tr.kind == "tr" and at.backdate == 6


def test_tr_sampling_frequency():
    spec = MechanismSpec("tr")
    idx = draw_indices(spec, 1, 12345, np.arange(100_000))
    frac = idx.mean()
    assert 0.495 <= frac <= 0.505


def test_at_sampling_frequency():
    spec = MechanismSpec("at", (-1, 0))
    vals = np.array(spec.options)[draw_indices(spec, 1, 99, np.arange(100_000))[:, 0]]
    for v in (-1, 0):
        assert 0.495 <= np.mean(vals == v) <= 0.505


def test_three_way_uniform():
    spec = MechanismSpec("at", (-2, -1, 0))
    idx = draw_indices(spec, 5, 7, np.arange(60_000))
    freq = np.bincount(idx.ravel(), minlength=3) / idx.size
    np.testing.assert_allclose(freq, 1 / 3, atol=0.005)


def test_sample_draw_is_deterministic_and_matches_engine():
    spec = MechanismSpec("at", (-2, -1, 0))
    a = sample_draw(spec, 8, seed=5, sim_index=17)
    assert a == sample_draw(spec, 8, seed=5, sim_index=17)
    row = draw_indices(spec, 8, 5, np.arange(30))[17]
    assert a.values == tuple(spec.options[k] for k in row)
    assert sample_draw(spec, 8, seed=6, sim_index=17) != a or sample_draw(spec, 8, seed=5, sim_index=18) != a


def test_streams_differ():
    spec = MechanismSpec("tr")
    a = draw_indices(spec, 30, 1, np.arange(50), stream=0)
    b = draw_indices(spec, 30, 1, np.arange(50), stream=1)
    assert not np.array_equal(a, b)


def test_sampling_hits_all_tr_draws_n4():
    seen = {sample_draw(MechanismSpec("tr"), 4, seed=3, sim_index=s).values for s in range(160)}
    assert len(seen) == 16


def test_enumeration_order():
    draws = [d.values for d in enumerate_draws(MechanismSpec("tr"), 2)]
    assert draws == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert len(list(enumerate_draws(MechanismSpec("at", (-1, 0)), 2))) == 4
    with pytest.raises(AssignmentError, match="Monte Carlo"):
        enumerate_draws(MechanismSpec("tr"), 62)


@pytest.mark.parametrize("K, n", [(2, 4), (3, 3), (5, 2)])
def test_enumerate_indices_chunks_match_product(K, n):
    full = enumerate_indices(K, n, 0, K**n)
    assert len({tuple(r) for r in full}) == K**n
    parts = np.vstack([enumerate_indices(K, n, a, min(a + 7, K**n)) for a in range(0, K**n, 7)])
    np.testing.assert_array_equal(full, parts)
    spec = MechanismSpec("at", tuple(range(-K + 1, 1)))
    listed = [tuple(spec.options.index(v) for v in d.values) for d in enumerate_draws(spec, n)]
    assert listed == [tuple(r) for r in full]


def test_expand_rows():
    v = view(2)
    np.testing.assert_array_equal(expand(AssignmentDraw("tr", (0,)), v).D, [[1, 1, 0, 0]])
    np.testing.assert_array_equal(expand(AssignmentDraw("tr", (1,)), v).D, [[0, 0, 1, 1]])
    np.testing.assert_array_equal(expand(AssignmentDraw("at", (1,)), v).D, [[0, 0, 0, 1]])
    with pytest.raises(AssignmentError):
        expand(AssignmentDraw("tr", (1, 1)), v)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.data())
def test_row_sums(tau, n, data):
    v = view(tau, n)
    bits = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    D = expand(AssignmentDraw("tr", tuple(bits)), v).D
    assert (D.sum(axis=1) == tau).all()
    offs = data.draw(st.lists(st.integers(-tau + 1, tau - 1), min_size=n, max_size=n))
    D = expand(AssignmentDraw("at", tuple(offs)), v).D
    np.testing.assert_array_equal(D.sum(axis=1), tau - np.array(offs))
    assert (np.diff(D, axis=1) >= 0).all()


@pytest.mark.parametrize("spec", [MechanismSpec("tr"), MechanismSpec("at", (-2, -1, 0))])
def test_expand_factual_is_post_indicator(spec):
    v = view(3, n=4)
    D = expand(factual_draw(spec, 4), v).D
    np.testing.assert_array_equal(D, np.tile([0, 0, 0, 1, 1, 1], (4, 1)))
