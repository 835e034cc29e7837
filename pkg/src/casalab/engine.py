"""CASA as a replayable state machine.

Prices are held as integer grid ticks (price = tick * epsilon) so that the
winner-determination step at settlement compares exact integers.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from functools import cached_property
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Sequence, Union

import numpy as np

from .core import CasaError, FeasibilityMode, Menu, ParameterError, ValuationProfile
from .wdp import solve_wdp

if TYPE_CHECKING:
    from .strategies import Strategy

MAX_STAGES = 10**6


class ProtocolFault(CasaError):
    """A strategy submitted an action that violates the bidding rules."""

    def __init__(self, violation: "Violation", transcript: "Transcript | None" = None):
        super().__init__(str(violation))
        self.violation = violation
        self.transcript = transcript


class RunawayError(CasaError):
    def __init__(self, message: str, transcript: "Transcript | None" = None):
        super().__init__(message)
        self.transcript = transcript


class BidderCountWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PriceGrid:
    """Bid grid ``{0, eps, 2*eps, ...}`` up to ``max_price``."""

    epsilon: float
    max_price: float

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ParameterError("grid step must be positive")
        if not self.max_price >= self.epsilon:
            raise ParameterError("max_price must be at least one grid step")

    @cached_property
    def max_tick(self) -> int:
        t = int(math.floor(self.max_price / self.epsilon))
        while (t + 1) * self.epsilon <= self.max_price:
            t += 1
        while t * self.epsilon > self.max_price:
            t -= 1
        return t

    def price(self, tick: int) -> float:
        return tick * self.epsilon

    def floor_tick(self, x: float) -> int:
        """Largest tick whose price is <= x (clipped to the grid)."""
        if x < 0:
            return -1
        t = int(math.floor(x / self.epsilon))
        while (t + 1) * self.epsilon <= x:
            t += 1
        while t > 0 and t * self.epsilon > x:
            t -= 1
        return min(t, self.max_tick)

    def below_tick(self, x: float) -> int:
        """Largest tick whose price is strictly below x; -1 if none."""
        t = self.floor_tick(x)
        while t >= 0 and t * self.epsilon >= x:
            t -= 1
        return t

    def check_covers(self, v_hi: float) -> None:
        if not self.price(self.max_tick) > v_hi:
            raise ParameterError(
                f"largest grid price {self.price(self.max_tick)} must exceed v_hi={v_hi}"
            )

    @classmethod
    def covering(cls, v_hi: float, epsilon: float) -> "PriceGrid":
        """Smallest grid with step ``epsilon`` whose top point exceeds ``v_hi``."""
        t = int(math.floor(v_hi / epsilon)) + 1
        while (t - 1) * epsilon > v_hi:
            t -= 1
        return cls(epsilon, t * epsilon)


@dataclass(frozen=True)
class Quit:
    def to_json(self) -> Any:
        return "quit"


QUIT = Quit()


@dataclass(frozen=True)
class Bid:
    """Non-empty set of (bundle index, price tick) pairs."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted((int(b), int(t)) for b, t in self.pairs)))

    def to_json(self) -> Any:
        return [list(p) for p in self.pairs]

    def bundles(self) -> set[int]:
        return {b for b, _ in self.pairs}


Action = Union[Quit, Bid]


def action_from_json(obj: Any) -> Quit | Bid:
    if obj == "quit":
        return QUIT
    if not isinstance(obj, list):
        raise ValueError(f"cannot parse action {obj!r}")
    return Bid(tuple((int(b), int(t)) for b, t in obj))


@dataclass(frozen=True)
class AuctionState:
    stage: int
    prices: tuple[int, ...]
    leaders: tuple[int | None, ...]
    active: frozenset[int]
    quiet_stages: int
    n_bidders: int
    last_mover: int | None = None

    def leading(self, bidder: int) -> frozenset[int]:
        return frozenset(i for i, n in enumerate(self.leaders) if n == bidder)


@dataclass(frozen=True)
class Observation:
    """What the mover sees: prices, own leading bundles, static auction data."""

    prices: tuple[int, ...]
    my_leading: frozenset[int]
    menu: Menu
    grid: PriceGrid
    n_bidders: int
    valuation: np.ndarray = field(repr=False)
    bidder: int = 0
    n_active: int | None = None

    def price(self, i: int) -> float:
        return self.grid.price(self.prices[i])

    def value(self, i: int) -> float:
        return float(self.valuation[self.menu.masks[i]])

    def digest(self) -> str:
        payload = json.dumps([list(self.prices), sorted(self.my_leading)])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Violation:
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.detail}"


def new_auction(menu: Menu, grid: PriceGrid, n_bidders: int, strict: bool = False) -> AuctionState:
    if n_bidders < 1:
        raise ParameterError("need at least one bidder")
    if grid.max_tick < 1:
        raise ParameterError("grid has no positive price")
    if n_bidders < len(menu) + 1:
        msg = f"N={n_bidders} is below |menu|+1={len(menu) + 1}"
        if strict:
            raise ParameterError(msg)
        warnings.warn(msg, BidderCountWarning, stacklevel=2)
    return AuctionState(
        stage=0,
        prices=(0,) * len(menu),
        leaders=(None,) * len(menu),
        active=frozenset(range(n_bidders)),
        quiet_stages=0,
        n_bidders=n_bidders,
    )


def validate_action(
    state: AuctionState, bidder: int, action: Quit | Bid, grid: PriceGrid
) -> Violation | None:
    if bidder not in state.active:
        return Violation("inactive-bidder", f"bidder {bidder} is not active")
    leading = state.leading(bidder)
    if isinstance(action, Quit):
        if leading:
            return Violation(
                "leading-quit", f"bidder {bidder} leads bundles {sorted(leading)} and cannot quit"
            )
        return None
    if not isinstance(action, Bid):
        return Violation("malformed", f"unknown action {action!r}")
    if not action.pairs:
        return Violation("empty-bid", "a bid must name at least one bundle")
    seen = set()
    max_tick = grid.max_tick
    for b, t in action.pairs:
        if not 0 <= b < len(state.prices):
            return Violation("unknown-bundle", f"bundle index {b} not in menu")
        if b in seen:
            return Violation("duplicate-bundle", f"bundle {b} appears twice")
        seen.add(b)
        if not 0 <= t <= max_tick:
            return Violation("off-grid", f"tick {t} outside 0..{max_tick}")
        if b in leading:
            if t < state.prices[b]:
                return Violation(
                    "binding-lead", f"bundle {b}: tick {t} below own leading tick {state.prices[b]}"
                )
        elif t <= state.prices[b]:
            return Violation(
                "minimum-increment", f"bundle {b}: tick {t} not above leading tick {state.prices[b]}"
            )
    missing = leading - seen
    if missing:
        return Violation("binding-lead", f"leading bundles {sorted(missing)} omitted from bid")
    return None


def apply_action(state: AuctionState, bidder: int, action: Quit | Bid) -> AuctionState:
    prices, leaders, active = state.prices, state.leaders, state.active
    if isinstance(action, Quit):
        active = active - {bidder}
    else:
        p, l = list(prices), list(leaders)
        for b, t in action.pairs:
            p[b], l[b] = t, bidder
        prices, leaders = tuple(p), tuple(l)
    quiet = state.quiet_stages + 1 if prices == state.prices else 0
    return AuctionState(
        stage=state.stage + 1,
        prices=prices,
        leaders=leaders,
        active=active,
        quiet_stages=quiet,
        n_bidders=state.n_bidders,
        last_mover=bidder,
    )


def is_terminated(state: AuctionState) -> bool:
    return not state.active or state.quiet_stages >= state.n_bidders


def next_mover(state: AuctionState) -> int | None:
    """Active bidders move in ascending index order, wrapping around."""
    if is_terminated(state):
        return None
    order = sorted(state.active)
    if state.last_mover is not None:
        for n in order:
            if n > state.last_mover:
                return n
    return order[0]


@dataclass(frozen=True)
class Outcome:
    selection: tuple[int, ...]
    winners: tuple[int, ...]
    payment_ticks: tuple[int, ...]
    payments: tuple[float, ...]
    revenue_ticks: int
    revenue: float
    utilities: tuple[float, ...] | None = None

    def to_json(self) -> dict:
        return {
            "selection": list(self.selection),
            "winners": list(self.winners),
            "payment_ticks": list(self.payment_ticks),
            "payments": list(self.payments),
            "revenue_ticks": self.revenue_ticks,
            "revenue": self.revenue,
            "utilities": None if self.utilities is None else list(self.utilities),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Outcome":
        return cls(
            tuple(d["selection"]),
            tuple(d["winners"]),
            tuple(d["payment_ticks"]),
            tuple(d["payments"]),
            d["revenue_ticks"],
            d["revenue"],
            None if d.get("utilities") is None else tuple(d["utilities"]),
        )


def won_value(valuation: np.ndarray, menu: Menu, won: Sequence[int]) -> float:
    """Value of the bundles a bidder wins, taken jointly.

    Disjoint menus use the value of the union; under the quantity cap only the
    total number of items matters, so the canonical bundle of that size is used.
    """
    if not won:
        return 0.0
    if menu.mode is FeasibilityMode.QUANTITY_CAP:
        q = min(sum(menu.sizes[i] for i in won), menu.n_items)
        return float(valuation[(1 << q) - 1])
    mask = 0
    for i in won:
        mask |= menu.masks[i]
    return float(valuation[mask])


def settle(
    state: AuctionState,
    menu: Menu,
    grid: PriceGrid,
    valuations: ValuationProfile | None = None,
) -> Outcome:
    """Revenue-maximizing feasible selection at final prices, pay-as-bid."""
    res = solve_wdp(menu, list(state.prices))
    winners = tuple(state.leaders[i] for i in res.selection)
    pay = [0] * state.n_bidders
    for i, n in zip(res.selection, winners):
        pay[n] += state.prices[i]
    utilities = None
    if valuations is not None:
        utilities = []
        for n in range(state.n_bidders):
            won = [i for i, w in zip(res.selection, winners) if w == n]
            utilities.append(won_value(valuations.values[n], menu, won) - grid.price(pay[n]))
        utilities = tuple(utilities)
    revenue_ticks = int(res.objective)
    return Outcome(
        selection=res.selection,
        winners=winners,
        payment_ticks=tuple(pay),
        payments=tuple(grid.price(t) for t in pay),
        revenue_ticks=revenue_ticks,
        revenue=grid.price(revenue_ticks),
        utilities=utilities,
    )


@dataclass(frozen=True)
class Record:
    stage: int
    bidder: int
    digest: str
    action: Quit | Bid
    prices: tuple[int, ...]


@dataclass
class Transcript:
    config: dict
    records: list[Record]
    final_state: AuctionState
    outcome: Outcome | None

    @property
    def revenue(self) -> float:
        return self.outcome.revenue if self.outcome else float("nan")


def observe(
    state: AuctionState,
    bidder: int,
    menu: Menu,
    grid: PriceGrid,
    valuations: ValuationProfile,
    observe_active: bool = False,
) -> Observation:
    return Observation(
        prices=state.prices,
        my_leading=state.leading(bidder),
        menu=menu,
        grid=grid,
        n_bidders=state.n_bidders,
        valuation=valuations.values[bidder],
        bidder=bidder,
        n_active=len(state.active) if observe_active else None,
    )


def config_snapshot(
    menu: Menu,
    grid: PriceGrid,
    valuations: ValuationProfile,
    seed: int,
    strategies: Sequence["Strategy"] = (),
    observe_active: bool = False,
) -> dict:
    return {
        "n_items": menu.n_items,
        "menu": [list(b.members) for b in menu.bundles],
        "mode": menu.mode.value,
        "epsilon": grid.epsilon,
        "max_price": grid.max_price,
        "n_bidders": valuations.n_bidders,
        "v_lo": valuations.v_lo,
        "v_hi": valuations.v_hi,
        "valuations": valuations.values.tolist(),
        "seed": seed,
        "strategies": [s.describe() for s in strategies],
        "observe_active": observe_active,
    }


def bidder_rng(seed: int, bidder: int) -> np.random.Generator:
    return np.random.default_rng([seed, bidder])


def run(
    menu: Menu,
    grid: PriceGrid,
    strategies: Sequence["Strategy"],
    valuations: ValuationProfile,
    seed: int = 0,
    strict: bool = False,
    max_stages: int = MAX_STAGES,
    observe_active: bool = False,
) -> Transcript:
    """Play one auction to completion and settle it."""
    n = valuations.n_bidders
    if len(strategies) != n:
        raise ParameterError(f"{len(strategies)} strategies for {n} bidders")
    if valuations.n_items != menu.n_items:
        raise ParameterError("valuations and menu disagree on the item count")
    grid.check_covers(valuations.v_hi)
    state = new_auction(menu, grid, n, strict=strict)
    for s in strategies:
        s.reset()
    rngs = [bidder_rng(seed, i) for i in range(n)]
    config = config_snapshot(menu, grid, valuations, seed, strategies, observe_active)
    records: list[Record] = []
    while True:
        mover = next_mover(state)
        if mover is None:
            break
        if state.stage >= max_stages:
            raise RunawayError(
                f"auction exceeded {max_stages} stages",
                Transcript(config, records, state, None),
            )
        obs = observe(state, mover, menu, grid, valuations, observe_active)
        action = strategies[mover].act(obs, rngs[mover])
        violation = validate_action(state, mover, action, grid)
        if violation is not None:
            raise ProtocolFault(violation, Transcript(config, records, state, None))
        state = apply_action(state, mover, action)
        records.append(Record(state.stage, mover, obs.digest(), action, state.prices))
    outcome = settle(state, menu, grid, valuations)
    return Transcript(config, records, state, outcome)
