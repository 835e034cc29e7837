import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casalab.core import Bundle, FeasibilityMode, Menu, ParameterError
from casalab.menus import (
    RESOLUTION,
    PreferenceClass,
    build_menu,
    check_expost_sufficiency,
    correlated_valuation,
    disjoint_collections,
    gen_valuation,
    gen_vector,
    homogeneous_rank_bound_holds,
    is_homogeneous,
    is_partitioned_complements,
    is_weak_complements,
    is_weak_substitutes,
    quantity_menu,
    satisfies,
    set_partitions,
    sufficiency_surplus_check,
    union_menu,
)

ADDITIVE = np.array([0.0, 0.25, 0.5, 0.75])
SUPER = np.array([0.0, 0.25, 0.25, 1.0])
UNIT_DEMAND = np.array([0.0, 0.5, 0.25, 0.5])


def test_class_checkers_on_hand_built_vectors():
    assert is_weak_substitutes(ADDITIVE, 2) and is_weak_substitutes(UNIT_DEMAND, 2)
    assert not is_weak_substitutes(SUPER, 2)
    assert is_weak_complements(SUPER, 2) and is_weak_complements(ADDITIVE, 2)
    assert not is_weak_complements(UNIT_DEMAND, 2)
    assert is_homogeneous(np.array([0.0, 0.25, 0.25, 0.5]), 2)
    assert not is_homogeneous(ADDITIVE, 2)
    four = np.zeros(16)
    four[0b0011] = four[0b1100] = 0.5
    four[0b1111] = 1.0
    assert is_partitioned_complements(four, 4, [[0, 1], [2, 3]])


def test_partition_and_collection_counts():
    assert sum(1 for _ in set_partitions([0, 1, 2, 3])) == 15  # Bell number
    assert sum(1 for _ in set_partitions([0, 1, 2, 3, 4])) == 52
    colls = list(disjoint_collections([1, 2, 3]))
    assert sorted(colls) == sorted([(), (1,), (2,), (3,), (1, 2)])


@pytest.mark.parametrize(
    "cls",
    [
        PreferenceClass("weak_substitutes", m) for m in (1, 3, 5)
    ]
    + [PreferenceClass("weak_complements", m) for m in (1, 3, 5)]
    + [PreferenceClass("homogeneous", m) for m in (1, 3, 5)]
    + [PreferenceClass("partitioned_complements", 4, ((0, 1), (2, 3))),
       PreferenceClass("partitioned_complements", 5, ((0,), (1, 2), (3, 4)))],
)
def test_generators_stay_in_class_and_on_grid(cls):
    rng = np.random.default_rng(1)
    for _ in range(25):
        vec = gen_vector(cls, rng)
        assert satisfies(cls, vec)
        assert vec[0] == 0.0 and np.all(vec >= 0) and np.all(vec <= 1)
        assert np.all(np.round(vec / RESOLUTION) * RESOLUTION == vec)
        menu, _ = build_menu(cls)
        assert check_expost_sufficiency(vec, menu)


def test_valuation_seeding():
    cls = PreferenceClass("weak_substitutes", 3)
    a = gen_valuation(cls, 4, seed=2, trial=5).values
    b = gen_valuation(cls, 4, seed=2, trial=5).values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a[0], a[1])
    c = correlated_valuation(cls, 4, seed=2, trial=5).values
    assert all(np.array_equal(c[0], row) for row in c)


@pytest.mark.parametrize(
    "cls, size, rank",
    [
        (PreferenceClass("weak_substitutes", 4), 4, 5),
        (PreferenceClass("weak_complements", 4), 1, 2),
        (PreferenceClass("partitioned_complements", 5, ((0,), (1, 2), (3, 4))), 3, 4),
        (PreferenceClass("homogeneous", 4), 8, 9),
        (PreferenceClass("homogeneous", 3), 5, 6),
    ],
)
def test_menu_sizes_and_ranks(cls, size, rank):
    menu, k = build_menu(cls)
    assert len(menu) == size and k == rank


def test_quantity_menu_layout():
    menu = quantity_menu(4)
    assert menu.mode is FeasibilityMode.QUANTITY_CAP
    sizes = [len(b) for b in menu.bundles]
    assert sizes == [1, 1, 1, 1, 2, 2, 3, 4]
    assert menu.bundles[4] == Bundle([0, 1]) and menu.bundles[5] == Bundle([2, 3])


@pytest.mark.parametrize("m, holds", [(1, False), (2, False), (3, True), (4, True), (5, True), (8, True)])
def test_homogeneous_rank_bound_only_from_three_items(m, holds):
    # |menu|+1 is 2 for one item and 4 for two, above (M^2+M)/2 = 1 and 3
    assert homogeneous_rank_bound_holds(m) is holds


def test_union_menu_deduplicates():
    a = Menu((Bundle([0, 1]), Bundle([2, 3])), 4)
    b = Menu((Bundle([0, 1]), Bundle([2]), Bundle([3])), 4)
    u = union_menu([a, b])
    assert [x.members for x in u.bundles] == [(0, 1), (2, 3), (2,), (3,)]
    with pytest.raises(ParameterError):
        union_menu([a, Menu.singletons(3)])


def test_restricted_menu_is_not_always_sufficient():
    assert not check_expost_sufficiency(SUPER, Menu.singletons(2))
    assert check_expost_sufficiency(SUPER, Menu.complete(2))


@pytest.mark.parametrize("kind", ["weak_substitutes", "weak_complements", "homogeneous"])
def test_sufficiency_surplus_check_passes(kind):
    cls = PreferenceClass(kind, 3)
    menu, k = build_menu(cls)
    rep = sufficiency_surplus_check(cls, menu, k, 3 * k, trials=300)
    assert rep.benchmark == "surplus" and rep.verdict


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 16), min_size=3, max_size=3))
def test_additive_vectors_are_substitutes_and_complements(w):
    vec = np.zeros(8)
    for mask in range(1, 8):
        vec[mask] = sum(w[i] for i in range(3) if mask >> i & 1) / 48
    assert is_weak_substitutes(vec, 3) and is_weak_complements(vec, 3)


def test_preference_class_validation():
    with pytest.raises(ParameterError):
        PreferenceClass("gross_substitutes", 2)
    with pytest.raises(ParameterError):
        PreferenceClass("partitioned_complements", 3, ((0,), (1,)))
