"""Bidding agents and the quit-dominance validator.

Every strategy maps an :class:`~casalab.engine.Observation` (plus its own
seeded RNG) to an action that complies with the bidding rules: leading bundles
are always re-bid at an unchanged price and new bids raise by at least one
grid step.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .core import Menu, ParameterError, SizeError, ValuationProfile
from .engine import QUIT, Bid, Observation, Quit
from .wdp import in_some_optimum

EXHAUSTIVE_CAP = 4


class Strategy:
    """Base class: subclasses implement :meth:`act`."""

    name = "strategy"

    def act(self, obs: Observation, rng: np.random.Generator) -> Quit | Bid:
        raise NotImplementedError

    def reset(self) -> None:
        pass

    def params(self) -> dict[str, Any]:
        return {}

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, "params": self.params()}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _rebid(obs: Observation) -> list[tuple[int, int]]:
    return [(i, obs.prices[i]) for i in sorted(obs.my_leading)]


def _best_raise(obs: Observation, values, exclude, margin: float = 0.0) -> int | None:
    """Non-excluded bundle with the largest surplus above ``margin`` after a one-step raise."""
    best, best_i = None, None
    top = obs.grid.max_tick
    for i in range(len(obs.menu)):
        if i in exclude or obs.prices[i] + 1 > top:
            continue
        s = values[i] - obs.grid.price(obs.prices[i] + 1)
        if s > margin and (best is None or s > best):
            best, best_i = s, i
    return best_i


def _own_values(obs: Observation) -> list[float]:
    return [obs.value(i) for i in range(len(obs.menu))]


class Straightforward(Strategy):
    """Re-bid leads; raise one step on a surplus-maximizing bundle; quit when nothing pays.

    With ``margin > 0`` the bidder ignores thin surpluses, but before quitting it
    still bids on any bundle the quit validator marks as a dominance witness.
    """

    name = "straightforward"

    def __init__(self, margin: float = 0.0):
        if margin < 0:
            raise ParameterError("margin must be non-negative")
        self.margin = float(margin)

    def params(self):
        return {"margin": self.margin}

    def _raise_tick(self, obs: Observation, i: int, value: float) -> int:
        return obs.prices[i] + 1

    def act(self, obs, rng):
        values = _own_values(obs)
        pairs = _rebid(obs)
        i = _best_raise(obs, values, obs.my_leading, self.margin)
        if i is not None:
            pairs.append((i, self._raise_tick(obs, i, values[i])))
        elif not obs.my_leading:
            if self.margin > 0:
                w = quit_witness(obs)
                if w is not None:
                    return Bid(((w, obs.prices[w] + 1),))
            return QUIT
        return Bid(tuple(pairs))


def straightforward(margin: float = 0.0) -> Straightforward:
    return Straightforward(margin)


class JumpBidder(Straightforward):
    """Straightforward, but raises straight to the grid point at ``theta * value``."""

    name = "jump"

    def __init__(self, theta: float = 1.0):
        super().__init__(0.0)
        if not 0 < theta <= 1:
            raise ParameterError("theta must lie in (0, 1]")
        self.theta = float(theta)

    def params(self):
        return {"theta": self.theta}

    def _raise_tick(self, obs, i, value):
        target = obs.grid.floor_tick(self.theta * value)
        return max(obs.prices[i] + 1, target)


def jump_bidder(theta: float = 1.0) -> JumpBidder:
    return JumpBidder(theta)


class SpoilerOverbidder(Straightforward):
    """Straightforward, plus overbids above own value on ``target`` while the price is below ``cap``."""

    name = "spoiler"

    def __init__(self, target: int, cap: float):
        super().__init__(0.0)
        self.target = int(target)
        self.cap = float(cap)

    def params(self):
        return {"target": self.target, "cap": self.cap}

    def act(self, obs, rng):
        action = super().act(obs, rng)
        if isinstance(action, Quit):
            return action
        t = self.target
        if t in action.bundles() or t >= len(obs.menu):
            return action
        nxt = obs.prices[t] + 1
        price = obs.grid.price(nxt)
        if nxt <= obs.grid.max_tick and obs.value(t) <= price < self.cap:
            return Bid(action.pairs + ((t, nxt),))
        return action


def spoiler_overbidder(target: int, cap: float) -> SpoilerOverbidder:
    return SpoilerOverbidder(target, cap)


class NonStrategic(Strategy):
    """Arbitrary rule-abiding play.

    ``script`` is ``"quit"`` (quit at the first chance, never raise),
    ``"random"`` (random walk: quit with probability ``quit_prob`` when not
    leading, otherwise raise a random affordable bundle by 1..``max_step``
    ticks, never above a cap drawn once per run), or a callable
    ``(obs, rng) -> action``.
    """

    name = "non_strategic"

    def __init__(self, script: str | Callable = "quit", quit_prob: float = 0.2, max_step: int = 3):
        if not callable(script) and script not in ("quit", "random"):
            raise ParameterError(f"unknown script {script!r}")
        self.script = script
        self.quit_prob = float(quit_prob)
        self.max_step = int(max_step)
        self._cap: int | None = None

    def params(self):
        name = self.script if isinstance(self.script, str) else getattr(self.script, "__name__", "callable")
        return {"script": name, "quit_prob": self.quit_prob, "max_step": self.max_step}

    def reset(self):
        self._cap = None

    def act(self, obs, rng):
        if callable(self.script):
            return self.script(obs, rng)
        pairs = _rebid(obs)
        if self.script == "quit":
            return Bid(tuple(pairs)) if pairs else QUIT
        if self._cap is None:
            self._cap = int(rng.integers(1, obs.grid.max_tick + 1))
        raisable = [
            i for i in range(len(obs.menu)) if i not in obs.my_leading and obs.prices[i] < self._cap
        ]
        if not obs.my_leading and (not raisable or rng.random() < self.quit_prob):
            return QUIT
        if raisable and (not obs.my_leading or rng.random() < 0.5):
            i = int(rng.choice(raisable))
            step = int(rng.integers(1, self.max_step + 1))
            pairs.append((i, min(obs.prices[i] + step, self._cap)))
        return Bid(tuple(pairs))


def non_strategic(script: str | Callable = "quit", **kw) -> NonStrategic:
    return NonStrategic(script, **kw)


class ScriptedBidder(Strategy):
    """Replays a fixed list of per-turn actions, then falls back to ``after``.

    Entries are ``"quit"`` or lists of ``[bundle_index, price]`` pairs; prices
    are snapped to the grid with ``floor_tick``. Leading bundles missing from
    an entry are re-bid automatically so the script stays rule-abiding.
    """

    name = "scripted"

    def __init__(self, actions: Sequence[Any] = (), after: str = "straightforward"):
        self.actions = list(actions)
        self.after = after
        self._turn = 0
        self._fallback = make_strategy(after) if after != "quit" else NonStrategic("quit")

    def params(self):
        return {"actions": self.actions, "after": self.after}

    def reset(self):
        self._turn = 0
        self._fallback.reset()

    def act(self, obs, rng):
        turn = self._turn
        self._turn += 1
        if turn >= len(self.actions):
            return self._fallback.act(obs, rng)
        entry = self.actions[turn]
        if entry == "quit" and not obs.my_leading:
            return QUIT
        pairs = dict(_rebid(obs))
        if entry != "quit":
            for b, price in entry:
                pairs[int(b)] = max(obs.grid.floor_tick(float(price)), pairs.get(int(b), 0))
        return Bid(tuple(pairs.items())) if pairs else QUIT


@dataclass(frozen=True)
class CoalitionSpec:
    """Partition of bidders into coalitions that maximize joint payoff."""

    coalitions: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "coalitions", tuple(tuple(sorted(c)) for c in self.coalitions))

    def validate(self, n_bidders: int) -> None:
        members = [n for c in self.coalitions for n in c]
        if sorted(members) != list(range(n_bidders)):
            raise ParameterError("coalitions must cover every bidder exactly once")
        if any(not c for c in self.coalitions):
            raise ParameterError("empty coalition")

    def sizes(self) -> list[int]:
        return sorted((len(c) for c in self.coalitions), reverse=True)

    def effective_rank(self, menu_size: int) -> int:
        """Sum of the ``menu_size`` largest coalition sizes, plus one."""
        return sum(self.sizes()[:menu_size]) + 1

    @classmethod
    def singletons(cls, n_bidders: int) -> "CoalitionSpec":
        return cls(tuple((n,) for n in range(n_bidders)))


class _CoalitionBook:
    """State shared by the members of one coalition."""

    def __init__(self, members: Sequence[int], vectors: np.ndarray):
        self.members = tuple(members)
        self.vectors = vectors  # (|members|, 2^M)
        self.led: dict[int, tuple[int, int]] = {}

    def refresh(self, obs: Observation) -> None:
        for b, (m, t) in list(self.led.items()):
            if obs.prices[b] != t or (m == obs.bidder and b not in obs.my_leading):
                del self.led[b]
        for b in obs.my_leading:
            self.led[b] = (obs.bidder, obs.prices[b])

    def values(self, menu: Menu) -> list[float]:
        return [float(self.vectors[:, m].max()) for m in menu.masks]


class CoalitionMember(Strategy):
    """One slot of a coalition that bids on pooled (max-over-members) values.

    Members never outbid each other. A member that leads nothing quits when the
    coalition has no profitable raise left outside the bundles it already leads,
    so the last member to leave does so only when the group has no surplus.
    """

    name = "coalition"

    def __init__(self, book: _CoalitionBook):
        self.book = book

    def params(self):
        return {"members": list(self.book.members)}

    def reset(self):
        self.book.led.clear()

    def act(self, obs, rng):
        book = self.book
        book.refresh(obs)
        pairs = _rebid(obs)
        i = _best_raise(obs, book.values(obs.menu), set(book.led))
        if i is not None:
            t = obs.prices[i] + 1
            pairs.append((i, t))
            book.led[i] = (obs.bidder, t)
        elif not obs.my_leading:
            return QUIT
        return Bid(tuple(pairs))


def coalition_wrapper(
    spec: CoalitionSpec,
    valuations: ValuationProfile,
    singleton_factory: Callable[[], Strategy] = Straightforward,
) -> list[Strategy]:
    """Per-bidder strategies; singleton coalitions get ``singleton_factory()``."""
    spec.validate(valuations.n_bidders)
    out: list[Strategy | None] = [None] * valuations.n_bidders
    for c in spec.coalitions:
        if len(c) == 1:
            out[c[0]] = singleton_factory()
            continue
        book = _CoalitionBook(c, valuations.values[list(c)])
        for n in c:
            out[n] = CoalitionMember(book)
    return out  # type: ignore[return-value]


def quit_witness(obs: Observation, valuation: np.ndarray | None = None) -> int | None:
    """Bundle whose solo raise to just below value makes it part of some optimum."""
    vec = obs.valuation if valuation is None else valuation
    menu, grid = obs.menu, obs.grid
    for i in range(len(menu)):
        t = grid.below_tick(float(vec[menu.masks[i]]))
        if t <= obs.prices[i]:
            continue
        w = list(obs.prices)
        w[i] = t
        if in_some_optimum(menu, w, i):
            return i
    return None


def nod_quit_check(
    obs: Observation,
    valuation: np.ndarray | None = None,
    mode: str = "witness",
    levels: int = 8,
) -> bool:
    """True when quitting at ``obs`` is provably obviously dominated.

    ``witness`` raises one bundle at a time; ``exhaustive`` additionally raises
    the other bundles jointly over a coarsened price grid (menus of size at
    most 4). A ``False`` answer is not a proof that quitting is undominated.
    """
    if mode not in ("witness", "exhaustive"):
        raise ParameterError(f"unknown mode {mode!r}")
    if quit_witness(obs, valuation) is not None:
        return True
    if mode == "witness":
        return False
    menu, grid = obs.menu, obs.grid
    if len(menu) > EXHAUSTIVE_CAP:
        raise SizeError(f"exhaustive quit check needs |menu| <= {EXHAUSTIVE_CAP}")
    vec = obs.valuation if valuation is None else valuation
    top = grid.max_tick
    for i in range(len(menu)):
        t = grid.below_tick(float(vec[menu.masks[i]]))
        if t <= obs.prices[i]:
            continue
        others = [j for j in range(len(menu)) if j != i]
        axes = []
        for j in others:
            lo = obs.prices[j]
            pts = {lo, top} | {int(round(lo + (top - lo) * s / levels)) for s in range(levels + 1)}
            axes.append(sorted(pts))
        for combo in itertools.product(*axes):
            w = list(obs.prices)
            w[i] = t
            for j, x in zip(others, combo):
                w[j] = x
            if in_some_optimum(menu, w, i):
                return True
    return False


STRATEGY_REGISTRY: dict[str, type[Strategy]] = {
    "straightforward": Straightforward,
    "jump": JumpBidder,
    "spoiler": SpoilerOverbidder,
    "non_strategic": NonStrategic,
    "scripted": ScriptedBidder,
}


def make_strategy(name: str, params: dict | None = None) -> Strategy:
    try:
        cls = STRATEGY_REGISTRY[name]
    except KeyError:
        raise ParameterError(f"unknown strategy {name!r}") from None
    return cls(**(params or {}))
