import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casalab.core import Bundle, Menu, ParameterError, ValuationProfile
from casalab.guarantees import (
    DistributionError,
    DistributionSpec,
    build_fstar,
    fstar_expected_guarantee,
    gap_sweep,
    iid_family,
    loglog_slope,
    rank_guarantee,
    revenue_bound,
    singleton_family,
    slack_term,
    surplus_gap_report,
    theorem2_check,
    trial_columns,
)
from casalab.wdp import efficient_surplus

from strategies_hyp import menu_and_profile


@settings(max_examples=150, deadline=None)
@given(menu_and_profile(max_bidders=5))
def test_rank_guarantee_is_monotone_in_k(mp):
    menu, v = mp
    ranks = [rank_guarantee(v, menu, k) for k in range(1, v.n_bidders + 1)]
    assert all(a >= b for a, b in zip(ranks, ranks[1:]))


@settings(max_examples=150, deadline=None)
@given(menu_and_profile(max_bidders=5), st.sampled_from([0.5, 2.0, 4.0]))
def test_rank_guarantee_scales(mp, c):
    menu, v = mp
    for k in range(1, v.n_bidders + 1):
        assert rank_guarantee(v.scaled(c), menu, k) == c * rank_guarantee(v, menu, k)


@settings(max_examples=150, deadline=None)
@given(menu_and_profile(max_bidders=6))
def test_rank_below_surplus_once_distinct_winners_exist(mp):
    # with |menu|+1 bidders, every selected bundle has a distinct bidder valuing it at least R^k
    menu, v = mp
    k = len(menu) + 1
    if v.n_bidders >= k:
        assert rank_guarantee(v, menu, k - 1) <= efficient_surplus(v, menu)[0] + 1e-12


def test_revenue_bound_verdicts():
    v = ValuationProfile(np.array([[0.0, 10.0], [0.0, 7.0]]), 0.0, 10.0)
    ok = revenue_bound(6.5, v, Menu.grand(1), 1.0, 2)
    assert ok.ok and ok.bound == 6.0 and ok.guarantee == 7.0
    assert not revenue_bound(5.5, v, Menu.grand(1), 1.0, 2).ok
    vac = revenue_bound(0.0, v, Menu.grand(1), 1.0, 3)
    assert vac.vacuous and vac.ok
    assert json.dumps(vac.to_json())


def test_fstar_formula_and_marginal():
    spec = build_fstar(3, 10, 1)
    assert fstar_expected_guarantee(3, 10) == pytest.approx(0.4)
    arr = spec.sample_batch(0, 4000)
    pooled = arr[:, :, 1].ravel()
    # pooled per-bidder marginal is uniform on [0, 1]
    assert abs(pooled.mean() - 0.5) < 0.02
    assert abs(np.mean(pooled < 0.25) - 0.25) < 0.02
    assert all((a[:, 1] >= 0.8).sum() == 2 for a in arr)
    rep = theorem2_check(spec, Menu.grand(1), 3, 4000)
    assert abs(rep.rank_mean - 0.4) < 3 * rep.rank_se


def test_fstar_validation():
    with pytest.raises(ParameterError):
        build_fstar(1, 10, 1)
    with pytest.raises(ParameterError):
        build_fstar(11, 10, 1)
    with pytest.raises(ParameterError):
        build_fstar(2, 10, 4, n_items=2)
    assert build_fstar(2, 5, [0, 1]).target == 3


def test_max_correlated_rank_equals_random_bidder():
    spec = DistributionSpec("max_correlated", 2, 5)
    menu = Menu.complete(2)
    cols = trial_columns(spec.sample_batch(1, 200), menu, 3)
    # identical rows: averaging over bidders only adds rounding
    np.testing.assert_allclose(cols.rank, cols.random_bidder, rtol=0, atol=1e-12)
    np.testing.assert_allclose(cols.rank, cols.surplus, rtol=0, atol=1e-12)


@pytest.mark.parametrize("n, k", [(5, 2), (8, 3)])
def test_iid_single_item_matches_order_statistics(n, k):
    spec = DistributionSpec("iid", 1, n)
    rep = theorem2_check(spec, Menu.grand(1), k, 20000, seed=3)
    assert abs(rep.rank_mean - (n + 1 - k) / (n + 1)) < 3 * rep.rank_se
    assert abs(rep.surplus_mean - n / (n + 1)) < 3 * rep.surplus_se
    assert abs(rep.random_bidder_mean - 0.5) < 3 * rep.random_bidder_se
    assert rep.verdict


def test_distribution_validation():
    with pytest.raises(ParameterError):
        DistributionSpec("gaussian", 1, 2)
    with pytest.raises(ParameterError):
        DistributionSpec("custom", 1, 2)
    bad = DistributionSpec("custom", 1, 2, sampler=lambda rng, n: np.ones((n, 3)))
    with pytest.raises(DistributionError):
        bad.sample(0, 0)
    high = DistributionSpec("custom", 1, 2, sampler=lambda rng, n: np.full((n, 2), 2.0))
    with pytest.raises(DistributionError):
        high.sample(0, 0)


def test_sampling_is_seeded_per_trial():
    spec = DistributionSpec("iid", 2, 3)
    np.testing.assert_array_equal(spec.sample_array(5, 7), spec.sample_batch(5, 3, start=7)[0])
    assert not np.array_equal(spec.sample_array(5, 7), spec.sample_array(5, 8))


def test_family_gap_shrinks_like_one_over_n():
    menu = Menu.grand(1)
    rep = surplus_gap_report(singleton_family(2)(10), menu, 2, 4000)
    assert rep.verdict and rep.slack == slack_term(2, 1, 1.0, 10)
    sweep = gap_sweep(singleton_family(2), menu, 2, [10, 20, 40], 4000)
    assert sweep.slope == pytest.approx(-1.0, abs=0.1)
    iid = gap_sweep(iid_family(), menu, 2, [10, 20, 40], 4000)
    assert iid.slope == pytest.approx(-1.0, abs=0.15)
    assert loglog_slope([1, 2, 4], [1, 0.5, 0.25]) == pytest.approx(-1.0)
    with pytest.raises(ParameterError):
        loglog_slope([1, 2], [1, 0])
