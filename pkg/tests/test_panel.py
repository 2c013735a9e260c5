import io
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rinfer.assignment import AssignmentDraw, MechanismSpec, enumerate_draws, factual_draw
from rinfer.panel import PanelError, PanelSchema, load_panel, panel_to_csv, unit_averages, window

from conftest import make_panel


def lines(text):
    return io.StringIO(text)


def test_zero_fill_rule():
    p = load_panel(lines("unit,date,count\nA,2017-10-31,2\nA,2017-11-01,3\nB,2017-11-01,1\n"))
    assert (p.n, p.T) == (2, 2)
    assert p.unit_ids == ("A", "B")
    np.testing.assert_array_equal(p.outcomes, [[2, 3], [0, 1]])
    assert p.metadata["zero_filled"] == 1


def test_duplicates_are_summed():
    p = load_panel(lines("unit,date,count\nA,2017-10-31,2\nA,2017-10-31,5\nA,2017-11-01,1\n"))
    assert p.outcomes[0, 0] == 7


def test_tab_delimited_and_custom_columns():
    text = "barrio\tfecha\tn\ttipo\nX\t2017-01-01\t1\trobo\nX\t2017-01-02\t4\thurto\nX\t2017-01-02\t2\trobo\n"
    schema = PanelSchema("barrio", "fecha", "n", "tipo")
    p = load_panel(lines(text), schema)
    np.testing.assert_array_equal(p.outcomes, [[1, 6]])
    robo = load_panel(lines(text), schema, filters={"robo"})
    np.testing.assert_array_equal(robo.outcomes, [[1, 2]])
    hurto = load_panel(lines(text + "X\t2017-01-03\t0\thurto\n"), schema, filters=lambda c: c == "hurto")
    assert hurto.start == date(2017, 1, 2)
    np.testing.assert_array_equal(hurto.outcomes, [[4, 0]])


def test_full_date_range_is_densified():
    text = "unit,date,count\nA,2017-01-01,1\nB,2017-01-05,1\n"
    p = load_panel(lines(text))
    assert p.T == 5 and p.outcomes.sum() == 2


def test_panel_62_by_730(tmp_path):
    y = np.random.default_rng(0).poisson(5, (62, 730))
    src = make_panel(y, start=date(2016, 11, 1))
    path = tmp_path / "p.csv"
    path.write_text(panel_to_csv(src))
    p = load_panel(str(path))
    assert (p.n, p.T) == (62, 730)
    np.testing.assert_array_equal(p.outcomes, y)


@pytest.mark.parametrize(
    "text, match",
    [
        ("unit,date,count\nA,2017-13-01,1\n", "line 2"),
        ("unit,date,count\nA,2017-01-01,1\nA,2017-01-02,x\n", "line 3: non-numeric"),
        ("unit,date,count\nA,2017-01-01\n", "line 2"),
        ("unit,date,count\n", "no rows"),
        ("unit,day,count\nA,2017-01-01,1\n", "date column"),
    ],
)
def test_load_errors(text, match):
    with pytest.raises(PanelError, match=match):
        load_panel(lines(text))


def test_filter_leaving_nothing_is_an_error():
    text = "unit,date,count,cat\nA,2017-01-01,1,x\n"
    with pytest.raises(PanelError, match="no rows"):
        load_panel(lines(text), PanelSchema(category="cat"), filters={"y"})


def test_strict_missing():
    text = "unit,date,count\nA,2017-10-31,2\nA,2017-11-01,3\nB,2017-11-01,1\n"
    with pytest.raises(PanelError, match=r"\(B, 2017-10-31\)"):
        load_panel(lines(text), strict_missing=True)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(2, 8), st.integers(0, 2**31))
def test_zero_fill_idempotent_on_dense_input(n, T, seed):
    y = np.random.default_rng(seed).poisson(2, (n, T)).astype(float)
    p = make_panel(y)
    again = load_panel(lines(panel_to_csv(p)))
    np.testing.assert_array_equal(again.outcomes, p.outcomes)
    assert again.unit_ids == p.unit_ids


def test_window_periods():
    p = make_panel(np.zeros((62, 200)))
    v = window(p, 100, 1)
    assert v.periods == (99, 100)
    assert v.slab.size == 124
    assert window(p, 100, 3).periods == (97, 98, 99, 100, 101, 102)


def test_window_out_of_bounds():
    p = make_panel(np.zeros((2, 10)))
    with pytest.raises(PanelError, match=r"periods 0\.\.0"):
        window(p, 3, 3)
    with pytest.raises(PanelError, match=r"11\.\.11"):
        window(p, 8, 4)


def test_adoption_from_date_and_bounds():
    p = make_panel(np.zeros((1, 40)))
    a = p.adoption("2017-11-01")
    assert a.a0 == 32 and a.calendar_date == date(2017, 11, 1)
    with pytest.raises(PanelError):
        p.adoption(1)


def test_unit_averages_tr_read_off():
    p = make_panel([[4, 6]])
    avg = unit_averages(window(p, 2, 1), AssignmentDraw("tr", (1,)))
    assert (avg.treated_mean[0], avg.control_mean[0]) == (6, 4)
    rev = unit_averages(window(p, 2, 1), AssignmentDraw("tr", (0,)))
    assert (rev.treated_mean[0], rev.control_mean[0]) == (4, 6)


def test_unit_averages_at_forward_dated():
    p = make_panel([[1, 3, 5, 7]])
    avg = unit_averages(window(p, 3, 2), AssignmentDraw("at", (1,)))
    assert avg.control_mean[0] == 3.0
    assert avg.treated_mean[0] == 7.0
    assert (avg.control_count[0], avg.treated_count[0]) == (3, 1)


def test_unit_averages_rejects_degenerate_draw():
    p = make_panel([[1, 3, 5, 7]])
    with pytest.raises(PanelError, match="degenerate"):
        unit_averages(window(p, 3, 2), AssignmentDraw("at", (2,)))


def test_factual_averages_match_spreadsheet():
    # 3 units x 6 days, adoption on day 4, tau = 2: pre = days 2,3, post = days 4,5
    y = [[1, 2, 3, 4, 5, 6], [10, 0, 2, 8, 8, 1], [0, 0, 0, 1, 3, 9]]
    v = window(make_panel(y), 4, 2)
    avg = unit_averages(v, factual_draw(MechanismSpec("tr"), 3))
    np.testing.assert_allclose(avg.control_mean, [2.5, 1.0, 0.0])
    np.testing.assert_allclose(avg.treated_mean, [4.5, 8.0, 2.0])
    at = unit_averages(v, factual_draw(MechanismSpec("at", (-1, 0)), 3))
    np.testing.assert_allclose(at.treated_mean, avg.treated_mean)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.data())
def test_counts_cover_window(n, tau, data):
    c = data.draw(st.floats(-5, 5, allow_nan=False))
    p = make_panel(np.full((n, 2 * tau + 2), c))
    v = window(p, tau + 1, tau)
    support = tuple(range(-tau + 1, tau))
    for spec in (MechanismSpec("tr"), MechanismSpec("at", support)):
        for draw in enumerate_draws(spec, n):
            avg = unit_averages(v, draw)
            assert int((avg.treated_count + avg.control_count).sum()) == 2 * tau * n
            np.testing.assert_allclose(avg.treated_mean, c, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(avg.control_mean, c, rtol=1e-12, atol=1e-12)
