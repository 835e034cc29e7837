import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casalab.core import Bundle, FeasibilityMode, InfeasibleError, Menu, ParameterError, SizeError, ValuationProfile
from casalab.wdp import (
    batch_quantity_surplus,
    batch_surplus,
    best_complete_value,
    best_single_value,
    brute_force_matching,
    brute_force_surplus,
    brute_force_wdp,
    efficient_surplus,
    in_some_optimum,
    match_bundles_to_bidders,
    solve_wdp,
)

from strategies_hyp import dyadic, menu_and_profile, menus

PAIR = Menu((Bundle([0]), Bundle([1]), Bundle([0, 1])), 2)


def test_unique_maximizer_sells_grand_bundle():
    assert solve_wdp(PAIR, [0, 0, 1]).selection == (2,)


def test_tie_picks_lexicographically_smallest_selection():
    # (0, 1) and (2,) both reach 7; sorted tuples compare (0, 1) < (2,)
    res = solve_wdp(PAIR, [3, 4, 7])
    assert res.selection == (0, 1) and res.objective == 7
    assert brute_force_wdp(PAIR, [3, 4, 7]).selection == (0, 1)


def test_zero_and_negative_weights_never_selected():
    assert solve_wdp(PAIR, [0, 0, 0]).selection == ()
    assert solve_wdp(PAIR, [-1, 2, 0]).selection == (1,)


def test_quantity_cap_mode():
    menu = Menu((Bundle([0]), Bundle([1]), Bundle([0, 1])), 2, FeasibilityMode.QUANTITY_CAP)
    assert solve_wdp(menu, [1, 1, 3]).selection == (2,)
    assert solve_wdp(menu, [2, 2, 3]).selection == (0, 1)


def test_input_errors():
    with pytest.raises(ParameterError):
        solve_wdp(PAIR, [1, 2])
    with pytest.raises(ParameterError):
        solve_wdp(PAIR, [1, float("nan"), 2])
    with pytest.raises(SizeError):
        solve_wdp(Menu.complete(5), [1.0] * 31)


@settings(max_examples=300, deadline=None)
@given(st.data())
def test_solver_matches_enumeration(data):
    menu = data.draw(menus(max_items=4, max_size=12))
    w = data.draw(st.lists(dyadic(8, -4, 32), min_size=len(menu), max_size=len(menu)))
    a, b = solve_wdp(menu, w), brute_force_wdp(menu, w)
    assert a.objective == b.objective
    assert a.selection == b.selection


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_integer_weights_are_exact(data):
    menu = data.draw(menus(max_items=4, max_size=10))
    w = data.draw(st.lists(st.integers(0, 50), min_size=len(menu), max_size=len(menu)))
    res = solve_wdp(menu, w)
    assert isinstance(res.objective, int)
    assert res.objective == brute_force_wdp(menu, w).objective


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_in_some_optimum_matches_enumeration(data):
    from casalab.core import enumerate_feasible

    menu = data.draw(menus(max_items=3, max_size=7))
    w = data.draw(st.lists(st.integers(0, 6), min_size=len(menu), max_size=len(menu)))
    best = brute_force_wdp(menu, w).objective
    optima = [s for s in enumerate_feasible(menu) if sum(w[i] for i in s) == best]
    for i in range(len(menu)):
        assert in_some_optimum(menu, w, i) == any(i in s for s in optima)


def test_matching_assigns_distinct_bidders():
    values = np.array([[5.0, 4.0], [4.0, 1.0]])
    total, who = match_bundles_to_bidders([0, 1], values)
    assert total == 8.0 and who == (1, 0)
    with pytest.raises(InfeasibleError):
        match_bundles_to_bidders([0, 1], values[:1])


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_matching_matches_permutations(data):
    n = data.draw(st.integers(1, 5))
    b = data.draw(st.integers(1, n))
    flat = data.draw(st.lists(dyadic(), min_size=n * b, max_size=n * b))
    values = np.array(flat).reshape(n, b)
    total, who = match_bundles_to_bidders(list(range(b)), values)
    assert len(set(who)) == b
    assert total == brute_force_matching(list(range(b)), values)


@settings(max_examples=300, deadline=None)
@given(menu_and_profile())
def test_surplus_matches_enumeration(mp):
    menu, v = mp
    value, alloc = efficient_surplus(v, menu)
    assert value == brute_force_surplus(v, menu)
    assert alloc.value == value
    assert sum(v.value(n, b) for b, n in alloc.assignments) == value
    owners = [n for _, n in alloc.assignments]
    assert len(set(owners)) == len(owners)
    sel = [menu.index(b) for b in alloc.bundles]
    from casalab.core import feasible

    assert feasible(menu, sel)


@settings(max_examples=100, deadline=None)
@given(menu_and_profile(modes=(FeasibilityMode.DISJOINT,)))
def test_dp_and_matching_routes_agree(mp):
    menu, v = mp
    assert efficient_surplus(v, menu, "dp")[0] == efficient_surplus(v, menu, "matching")[0]
    assert batch_surplus(v.values[None], menu)[0] == efficient_surplus(v, menu)[0]


def test_dp_requires_disjoint_mode():
    menu = Menu.complete(2, FeasibilityMode.QUANTITY_CAP)
    v = ValuationProfile(np.zeros((2, 4)))
    with pytest.raises(ParameterError):
        efficient_surplus(v, menu, "dp")
    with pytest.raises(ParameterError):
        efficient_surplus(v, menu, "nope")


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.data())
def test_quantity_batch_surplus_for_size_only_values(m, n, data):
    sizes = np.array([bin(x).count("1") for x in range(1 << m)])
    u = np.array(data.draw(st.lists(dyadic(), min_size=n * m, max_size=n * m))).reshape(n, m)
    vals = np.zeros((n, 1 << m))
    vals[:, 1:] = u[:, sizes[1:] - 1]
    v = ValuationProfile(vals)
    expected = brute_force_surplus(v, Menu.complete(m, FeasibilityMode.QUANTITY_CAP))
    assert batch_quantity_surplus(vals[None], m)[0] == expected


def test_quantity_batch_surplus_rejects_item_specific_values():
    vals = np.array([[[0.0, 1.0, 0.5, 1.0]]])
    with pytest.raises(ParameterError):
        batch_quantity_surplus(vals, 2)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.data())
def test_complete_value_dp_matches_search(m, data):
    vec = np.array([0.0] + data.draw(st.lists(dyadic(), min_size=(1 << m) - 1, max_size=(1 << m) - 1)))
    for mode in FeasibilityMode:
        menu = Menu.complete(m, mode)
        assert best_complete_value(vec, m, mode) == best_single_value(vec, menu)
