import numpy as np
import pytest
from hypothesis import given, strategies as st

from casalab.core import (
    Bundle,
    FeasibilityMode,
    Menu,
    ParameterError,
    SelectionTable,
    SizeError,
    ValuationProfile,
    enumerate_feasible,
    feasible,
    kth_highest,
    kth_highest_per_bundle,
)

from strategies_hyp import menus


def test_bundle_mask_round_trip():
    b = Bundle([2, 0])
    assert b.mask == 0b101
    assert b.members == (0, 2)
    assert Bundle.from_mask(b.mask) == b
    assert repr(b) == "Bundle(0,2)"


def test_bundle_rejects_negative_items():
    with pytest.raises(ParameterError):
        Bundle([-1])


@pytest.mark.parametrize("bundles", [(), (Bundle([0]), Bundle([0])), (Bundle(),), (Bundle([3]),)])
def test_menu_validation(bundles):
    with pytest.raises(ParameterError):
        Menu(bundles, 2)


def test_menu_builders():
    assert [b.members for b in Menu.singletons(3)] == [(0,), (1,), (2,)]
    assert [b.members for b in Menu.grand(3)] == [(0, 1, 2)]
    full = Menu.complete(2)
    assert full.masks == (1, 2, 3)
    assert Menu.complete(3, FeasibilityMode.QUANTITY_CAP).mode is FeasibilityMode.QUANTITY_CAP


def test_profile_validation():
    with pytest.raises(ParameterError):
        ValuationProfile(np.ones((2, 3)))
    with pytest.raises(ParameterError):
        ValuationProfile(np.array([[1.0, 0.5]]))
    with pytest.raises(ParameterError):
        ValuationProfile(np.array([[0.0, 2.0]]), 0.0, 1.0)


def test_profile_is_read_only_and_indexable():
    v = ValuationProfile.from_sparse(2, [{(0,): 0.5, (0, 1): 0.75}, {(1,): 0.25}])
    assert v.value(0, [0, 1]) == 0.75
    assert v.value(1, 0b10) == 0.25
    assert v.value(1, [0]) == 0.0
    with pytest.raises(ValueError):
        v.values[0, 1] = 1.0
    menu = Menu((Bundle([1]), Bundle([0, 1])), 2)
    np.testing.assert_array_equal(v.on_menu(menu), [[0.0, 0.75], [0.25, 0.0]])
    assert v.without(0).n_bidders == 1
    assert v.scaled(2.0).value(0, [0, 1]) == 1.5


def test_kth_highest_counts_multiplicity():
    assert kth_highest([3, 7, 7, 1], 1) == 7
    assert kth_highest([3, 7, 7, 1], 2) == 7
    assert kth_highest([3, 7, 7, 1], 3) == 3
    with pytest.raises(ParameterError):
        kth_highest([1, 2], 3)


@given(st.lists(st.integers(0, 20), min_size=1, max_size=9), st.data())
def test_kth_highest_per_bundle_matches_sort(col, data):
    k = data.draw(st.integers(1, len(col)))
    mat = np.array([col, col[::-1]], dtype=float).T  # (N, 2)
    got = kth_highest_per_bundle(mat, k)
    assert got[0] == sorted(col, reverse=True)[k - 1]
    assert got[1] == sorted(col, reverse=True)[k - 1]


def test_feasibility_modes():
    disjoint = Menu((Bundle([0]), Bundle([1]), Bundle([0, 1])), 2)
    assert feasible(disjoint, [0, 1])
    assert not feasible(disjoint, [0, 2])
    qty = Menu((Bundle([0]), Bundle([1]), Bundle([0, 1])), 2, FeasibilityMode.QUANTITY_CAP)
    assert feasible(qty, [0, 1])
    assert not feasible(qty, [0, 2])
    with pytest.raises(ParameterError):
        feasible(disjoint, [0, 0])


def test_enumeration_order_and_cap():
    menu = Menu((Bundle([0]), Bundle([1]), Bundle([0, 1])), 2)
    assert list(enumerate_feasible(menu)) == [(), (0,), (0, 1), (1,), (2,)]
    with pytest.raises(SizeError):
        list(enumerate_feasible(Menu.complete(5)))


@given(menus(max_items=3, max_size=7))
def test_enumeration_is_exactly_the_feasible_subsets(menu):
    import itertools

    listed = set(enumerate_feasible(menu))
    for r in range(len(menu) + 1):
        for sel in itertools.combinations(range(len(menu)), r):
            assert (sel in listed) == feasible(menu, sel)


def test_selection_table_best_values():
    menu = Menu((Bundle([0]), Bundle([1]), Bundle([0, 1])), 2)
    table = SelectionTable.build(menu)
    w = np.array([[3.0, 4.0, 6.0], [1.0, 1.0, 5.0], [-1.0, -1.0, -1.0]])
    np.testing.assert_array_equal(table.best_values(w), [7.0, 5.0, 0.0])
