import numpy as np
import pytest

from casalab.core import Bundle, Menu, ParameterError, ValuationProfile
from casalab.engine import QUIT, Bid, Observation, PriceGrid, run
from casalab.guarantees import rank_guarantee
from casalab.strategies import (
    STRATEGY_REGISTRY,
    CoalitionSpec,
    JumpBidder,
    NonStrategic,
    ScriptedBidder,
    SpoilerOverbidder,
    Straightforward,
    coalition_wrapper,
    make_strategy,
    nod_quit_check,
    quit_witness,
)
from casalab.suites import audit_quits, play, random_scenario

GRID = PriceGrid(0.25, 1.25)
PAIR = Menu((Bundle([0]), Bundle([1]), Bundle([0, 1])), 2)
RNG = np.random.default_rng(0)


def obs(prices, leading=(), vec=(0.0, 0.5, 0.5, 1.0), menu=PAIR):
    return Observation(tuple(prices), frozenset(leading), menu, GRID, 4, np.array(vec))


def test_straightforward_raises_best_surplus():
    a = Straightforward().act(obs([0, 0, 0]), RNG)
    assert a == Bid(((2, 1),))


def test_straightforward_rebids_leads_and_quits():
    a = Straightforward().act(obs([2, 0, 4], leading=[0]), RNG)
    assert a == Bid(((0, 2), (1, 1)))
    assert Straightforward().act(obs([2, 2, 4]), RNG) is QUIT


def test_margin_keeps_witness_bid():
    # every one-step surplus is at most 0.25, below the margin, but bundle 0 is a witness
    vec = (0.0, 0.5, 0.5, 0.5)
    assert Straightforward(margin=0.3).act(obs([0, 0, 1], vec=vec), RNG) == Bid(((0, 1),))
    assert Straightforward().act(obs([0, 0, 1], vec=vec), RNG) == Bid(((0, 1),))
    with pytest.raises(ParameterError):
        Straightforward(-1)


def test_jump_bidder_targets_fraction_of_value():
    a = JumpBidder(0.8).act(obs([0, 0, 0]), RNG)
    assert a == Bid(((2, 3),))
    with pytest.raises(ParameterError):
        JumpBidder(0.0)


def test_spoiler_overbids_below_cap():
    s = SpoilerOverbidder(target=1, cap=1.0)
    a = s.act(obs([0, 2, 0]), RNG)
    assert (1, 3) in a.pairs
    b = s.act(obs([0, 4, 0]), RNG)
    assert all(i != 1 for i, _ in b.pairs)


def test_non_strategic_scripts():
    assert NonStrategic("quit").act(obs([0, 0, 0]), RNG) is QUIT
    assert NonStrategic("quit").act(obs([1, 0, 0], leading=[0]), RNG) == Bid(((0, 1),))
    with pytest.raises(ParameterError):
        NonStrategic("dance")


def test_scripted_bidder_snaps_and_falls_back():
    s = ScriptedBidder([[[2, 0.6]], "quit"], after="quit")
    assert s.act(obs([0, 0, 0]), RNG) == Bid(((2, 2),))
    assert s.act(obs([0, 0, 2], leading=[2]), RNG) == Bid(((2, 2),))
    assert s.act(obs([0, 0, 3]), RNG) is QUIT
    s.reset()
    assert s.act(obs([0, 0, 0]), RNG) == Bid(((2, 2),))


def test_registry_builds_every_strategy():
    params = {"spoiler": {"target": 0, "cap": 0.5}}
    for name in STRATEGY_REGISTRY:
        s = make_strategy(name, params.get(name))
        assert s.describe()["name"] == name
    with pytest.raises(ParameterError):
        make_strategy("oracle")


def test_quit_witness_and_exhaustive_check():
    # item 0 alone at price 0 with value 0.5: raising to 0.25 enters an optimum
    assert quit_witness(obs([0, 0, 0])) == 0
    assert nod_quit_check(obs([0, 0, 0]))
    # every price at or above value: no witness
    assert quit_witness(obs([2, 2, 4])) is None
    assert not nod_quit_check(obs([2, 2, 4]), mode="exhaustive")
    with pytest.raises(ParameterError):
        nod_quit_check(obs([0, 0, 0]), mode="guess")


def test_library_strategies_never_make_dominated_quits():
    for seed in range(40):
        scn = random_scenario(seed)
        assert audit_quits(play(scn)) == []


def test_coalition_rank_and_validation():
    spec = CoalitionSpec(((0, 1), (2,), (3, 4, 5)))
    assert spec.sizes() == [3, 2, 1]
    assert spec.effective_rank(2) == 6
    with pytest.raises(ParameterError):
        spec.validate(7)
    assert CoalitionSpec.singletons(3).effective_rank(2) == 3


def test_coalition_members_do_not_outbid_each_other():
    menu = Menu.grand(1)
    grid = PriceGrid(1.0, 11.0)
    v = ValuationProfile(np.array([[0.0, 10.0], [0.0, 8.0], [0.0, 6.0]]), 0.0, 10.0)
    spec = CoalitionSpec(((0, 1), (2,)))
    t = run(menu, grid, coalition_wrapper(spec, v), v)
    assert t.outcome.winners[0] in (0, 1)
    # the outsider stops once the next price leaves no surplus
    assert t.outcome.revenue == 5.0
    k = spec.effective_rank(len(menu))
    assert t.outcome.revenue >= rank_guarantee(v, menu, k) - len(menu) * grid.epsilon
