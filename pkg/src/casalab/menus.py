"""Preference classes, their menus, and single-bidder sufficiency checks.

Every generated value is snapped down to a dyadic grid, so sums of a few values
are exact in floating point and class inequalities can be checked with ``==``
and ``<=`` rather than tolerances.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .core import Bundle, CasaError, FeasibilityMode, Menu, ParameterError, ValuationProfile
from .guarantees import BoundReport, MC_TOLERANCE_SE, TrialColumns, _report, trial_columns
from .wdp import batch_quantity_surplus, batch_surplus, best_complete_value, best_single_value

RESOLUTION = 2.0 ** -16
MAX_VALIDATED_ITEMS = 5
CLASS_TOLERANCE = 1e-12  # slack for class inequalities on non-dyadic inputs

KINDS = ("weak_substitutes", "weak_complements", "partitioned_complements", "homogeneous")


class GenerationError(CasaError):
    """A generated vector failed its own class check."""


def snap(x):
    return np.floor(np.asarray(x, dtype=float) / RESOLUTION) * RESOLUTION


@dataclass(frozen=True)
class PreferenceClass:
    """A family of single-bidder valuations on ``n_items`` items.

    ``blocks`` (partitioned complements only) is a partition of the items.
    ``theta_lo`` is the lower end of the substitutes shrink factor; ``rho_lo``
    the lower end of the complements slack factor (1 makes the grand bundle
    exactly tight).
    """

    kind: str
    n_items: int
    blocks: tuple[tuple[int, ...], ...] = ()
    theta_lo: float = 0.5
    rho_lo: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown preference class {self.kind!r}")
        if self.n_items < 1:
            raise ParameterError("need at least one item")
        if not 0 <= self.theta_lo <= 1 or not 0 < self.rho_lo <= 1:
            raise ParameterError("theta_lo must lie in [0,1] and rho_lo in (0,1]")
        if self.kind == "partitioned_complements":
            items = sorted(i for b in self.blocks for i in b)
            if items != list(range(self.n_items)) or any(not b for b in self.blocks):
                raise ParameterError("blocks must partition the items")
            object.__setattr__(self, "blocks", tuple(tuple(sorted(b)) for b in self.blocks))

    @property
    def block_masks(self) -> tuple[int, ...]:
        return tuple(Bundle(b).mask for b in self.blocks)

    def describe(self) -> dict:
        d = {"kind": self.kind, "n_items": self.n_items, "seed": self.seed}
        if self.blocks:
            d["blocks"] = [list(b) for b in self.blocks]
        return d


# --------------------------------------------------------------------------
# generation


def _substitutes(rng, n_items: int, theta_lo: float, scale: float = 1.0) -> np.ndarray:
    full = 1 << n_items
    vec = np.zeros(full)
    items = snap(rng.random(n_items) * scale / n_items)
    for m in range(1, full):
        members = [i for i in range(n_items) if m >> i & 1]
        total = float(sum(items[i] for i in members))
        if len(members) == 1:
            vec[m] = total
        else:
            vec[m] = float(snap(rng.uniform(theta_lo, 1.0) * total))
    return vec


def _complements(rng, n_items: int, rho_lo: float, scale: float = 1.0) -> np.ndarray:
    full = (1 << n_items) - 1
    vec = np.zeros(full + 1)
    grand = float(snap(scale * rng.uniform(0.5, 1.0)))
    if full == 1:
        vec[1] = grand
        return vec
    vec[1:full] = rng.random(full - 1)
    packed = best_complete_value(vec, n_items, FeasibilityMode.DISJOINT)
    factor = rng.uniform(rho_lo, 1.0) * grand / packed * (1 - 1e-12)
    vec[1:full] = snap(vec[1:full] * factor)
    vec[full] = grand
    return vec


def _embed(sub: np.ndarray, items: Sequence[int], n_items: int) -> dict[int, float]:
    """Map a vector over ``len(items)`` local items to global masks."""
    out = {}
    for local in range(1, len(sub)):
        mask = 0
        for j, i in enumerate(items):
            if local >> j & 1:
                mask |= 1 << i
        out[mask] = float(sub[local])
    return out


def _partitioned(rng, cls: PreferenceClass) -> np.ndarray:
    n_items = cls.n_items
    vec = np.zeros(1 << n_items)
    scale = 1.0 / len(cls.blocks)
    for block in cls.blocks:
        sub = _complements(rng, len(block), cls.rho_lo, scale)
        for mask, x in _embed(sub, block, n_items).items():
            vec[mask] = x
    masks = cls.block_masks
    for m in range(1, 1 << n_items):
        parts = [m & b for b in masks if m & b]
        if len(parts) > 1:
            total = float(sum(vec[p] for p in parts))
            vec[m] = float(snap(rng.uniform(cls.theta_lo, 1.0) * total))
    return vec


def _homogeneous(rng, n_items: int) -> np.ndarray:
    u = snap(rng.random(n_items))
    vec = np.zeros(1 << n_items)
    for m in range(1, 1 << n_items):
        vec[m] = u[bin(m).count("1") - 1]
    return vec


def gen_vector(cls: PreferenceClass, rng: np.random.Generator) -> np.ndarray:
    """One valuation vector (indexed by bundle mask), validated before return."""
    if cls.kind == "weak_substitutes":
        vec = _substitutes(rng, cls.n_items, cls.theta_lo)
    elif cls.kind == "weak_complements":
        vec = _complements(rng, cls.n_items, cls.rho_lo)
    elif cls.kind == "partitioned_complements":
        vec = _partitioned(rng, cls)
    else:
        vec = _homogeneous(rng, cls.n_items)
    if cls.n_items <= MAX_VALIDATED_ITEMS and not satisfies(cls, vec):
        raise GenerationError(f"generated vector violates {cls.kind}")
    return vec


def gen_valuation(cls: PreferenceClass, n_bidders: int, seed: int | None = None,
                  trial: int = 0) -> ValuationProfile:
    """Independent class draws for ``n_bidders`` bidders."""
    rng = np.random.default_rng([cls.seed if seed is None else seed, trial])
    rows = np.stack([gen_vector(cls, rng) for _ in range(n_bidders)])
    return ValuationProfile(rows, 0.0, 1.0)


def correlated_valuation(cls: PreferenceClass, n_bidders: int, seed: int | None = None,
                         trial: int = 0) -> ValuationProfile:
    """One class draw copied to every bidder (maximal positive correlation)."""
    rng = np.random.default_rng([cls.seed if seed is None else seed, trial])
    row = gen_vector(cls, rng)
    return ValuationProfile(np.tile(row, (n_bidders, 1)), 0.0, 1.0)


# --------------------------------------------------------------------------
# class inequalities, checked straight from their definitions


def set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def disjoint_collections(masks: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """Every collection of pairwise-disjoint masks from ``masks`` (including empty)."""
    masks = list(masks)

    def rec(start, used, acc):
        yield tuple(acc)
        for j in range(start, len(masks)):
            if not used & masks[j]:
                acc.append(masks[j])
                yield from rec(j + 1, used | masks[j], acc)
                acc.pop()

    yield from rec(0, 0, [])


def _mask(items) -> int:
    return sum(1 << i for i in items)


def is_weak_substitutes(vec: np.ndarray, n_items: int) -> bool:
    for m in range(1, 1 << n_items):
        total = 0.0
        for i in range(n_items):
            if m >> i & 1:
                total += float(vec[1 << i])
        if total < vec[m] - CLASS_TOLERANCE:
            return False
    return True


def is_weak_complements(vec: np.ndarray, n_items: int) -> bool:
    full = (1 << n_items) - 1
    for coll in disjoint_collections(range(1, full + 1)):
        if sum(float(vec[m]) for m in coll) > vec[full] + CLASS_TOLERANCE:
            return False
    return True


def is_partitioned_complements(vec: np.ndarray, n_items: int, blocks: Sequence[Sequence[int]]) -> bool:
    block_masks = [_mask(b) for b in blocks]
    for block, bm in zip(blocks, block_masks):
        for part in set_partitions(block):
            if sum(float(vec[_mask(p)]) for p in part) > vec[bm] + CLASS_TOLERANCE:
                return False
    for m in range(1, 1 << n_items):
        if sum(float(vec[m & bm]) for bm in block_masks) < vec[m] - CLASS_TOLERANCE:
            return False
    return True


def is_homogeneous(vec: np.ndarray, n_items: int) -> bool:
    by_size: dict[int, float] = {}
    for m in range(1, 1 << n_items):
        s = bin(m).count("1")
        if by_size.setdefault(s, float(vec[m])) != vec[m]:
            return False
    return True


def satisfies(cls: PreferenceClass, vec: np.ndarray) -> bool:
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (1 << cls.n_items,) or vec[0] != 0 or np.any(vec < 0) or np.any(vec > 1):
        return False
    if cls.kind == "weak_substitutes":
        return is_weak_substitutes(vec, cls.n_items)
    if cls.kind == "weak_complements":
        return is_weak_complements(vec, cls.n_items)
    if cls.kind == "partitioned_complements":
        return is_partitioned_complements(vec, cls.n_items, cls.blocks)
    return is_homogeneous(vec, cls.n_items)


# --------------------------------------------------------------------------
# menus


def quantity_menu(n_items: int) -> Menu:
    """``floor(M/l)`` disjoint size-``l`` bundles (consecutive item blocks) per size."""
    bundles = []
    for size in range(1, n_items + 1):
        for c in range(n_items // size):
            bundles.append(Bundle(range(c * size, (c + 1) * size)))
    return Menu(tuple(bundles), n_items, FeasibilityMode.QUANTITY_CAP)


def build_menu(cls: PreferenceClass) -> tuple[Menu, int]:
    """The class's sufficient menu and the rank of its guarantee."""
    if cls.kind == "weak_substitutes":
        menu = Menu.singletons(cls.n_items)
    elif cls.kind == "weak_complements":
        menu = Menu.grand(cls.n_items)
    elif cls.kind == "partitioned_complements":
        menu = Menu(tuple(Bundle(b) for b in cls.blocks), cls.n_items)
    else:
        menu = quantity_menu(cls.n_items)
    return menu, len(menu) + 1


def union_menu(menus: Sequence[Menu]) -> Menu:
    """Union of several menus (first occurrence order), sharing items and mode."""
    if not menus:
        raise ParameterError("no menus to merge")
    n, mode = menus[0].n_items, menus[0].mode
    seen, bundles = set(), []
    for m in menus:
        if m.n_items != n or m.mode is not mode:
            raise ParameterError("menus disagree on items or mode")
        for b in m.bundles:
            if b not in seen:
                seen.add(b)
                bundles.append(b)
    return Menu(tuple(bundles), n, mode)


def check_expost_sufficiency(vec: np.ndarray, menu: Menu) -> bool:
    """Restricted-menu optimum equals the complete-menu optimum for one vector."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (1 << menu.n_items,):
        raise ParameterError("vector length must be 2^M")
    restricted = best_single_value(vec, menu)
    complete = best_complete_value(vec, menu.n_items, menu.mode)
    return restricted == complete


def sufficiency_surplus_check(cls: PreferenceClass, menu: Menu, k: int, n_bidders: int, trials: int,
                              seed: int | None = None) -> BoundReport:
    """``E[R^k] >= E[V*] - (k-1)|menu|/N`` under maximally correlated class draws.

    ``V*`` is the efficient surplus over the complete menu (with the menu's
    feasibility mode).
    """
    if not 1 <= k <= n_bidders:
        raise ParameterError(f"k={k} out of range 1..{n_bidders}")
    seed = cls.seed if seed is None else seed
    values = np.stack([correlated_valuation(cls, n_bidders, seed, t).values for t in range(trials)])
    restricted = trial_columns(values, menu, k, with_surplus=False)
    if menu.mode is FeasibilityMode.QUANTITY_CAP:
        surplus = batch_quantity_surplus(values, cls.n_items)
    else:
        surplus = batch_surplus(values, Menu.complete(cls.n_items))
    cols = TrialColumns(restricted.rank, restricted.random_bidder, surplus)
    return _report(f"{cls.kind}(M={cls.n_items})", cols, k, n_bidders, len(menu), 1.0, "surplus")


def homogeneous_rank_bound_holds(n_items: int) -> bool:
    """Whether ``|quantity menu| + 1 <= (M^2 + M)/2``."""
    return len(quantity_menu(n_items)) + 1 <= (n_items * n_items + n_items) / 2


__all__ = [
    "RESOLUTION",
    "GenerationError",
    "PreferenceClass",
    "gen_vector",
    "gen_valuation",
    "correlated_valuation",
    "set_partitions",
    "disjoint_collections",
    "is_weak_substitutes",
    "is_weak_complements",
    "is_partitioned_complements",
    "is_homogeneous",
    "satisfies",
    "quantity_menu",
    "build_menu",
    "union_menu",
    "check_expost_sufficiency",
    "sufficiency_surplus_check",
    "homogeneous_rank_bound_holds",
    "MC_TOLERANCE_SE",
]
