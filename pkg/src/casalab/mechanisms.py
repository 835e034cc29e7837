"""Baseline mechanisms: VCG and the second-price auction for the grand bundle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Allocation, Bundle, Menu, ParameterError, ValuationProfile
from .wdp import efficient_surplus


@dataclass(frozen=True)
class MechanismOutcome:
    allocation: Allocation
    payments: tuple[float, ...]
    revenue: float
    surplus: float


def vcg(v: ValuationProfile, menu: Menu) -> MechanismOutcome:
    """Truthful VCG over the menu with one bundle per bidder.

    Bidder ``n`` pays the others' best welfare without ``n`` minus the others'
    welfare at the efficient allocation. Bidders who receive nothing pay 0.
    """
    surplus, alloc = efficient_surplus(v, menu)
    payments = [0.0] * v.n_bidders
    own = {n: v.value(n, b) for b, n in alloc.assignments if n is not None}
    for n, value_n in own.items():
        without, _ = efficient_surplus(v.without(n), menu)
        payments[n] = max(without - (surplus - value_n), 0.0)
    return MechanismOutcome(alloc, tuple(payments), float(sum(payments)), surplus)


def others_welfare(v: ValuationProfile, alloc: Allocation, excluded: int) -> float:
    return float(sum(v.value(n, b) for b, n in alloc.assignments if n is not None and n != excluded))


def vcg_floor_allocation(
    v: ValuationProfile, excluded: int, efficient: Allocation | None = None
) -> Allocation:
    """Allocation of every bidder but ``excluded`` built from the efficient one.

    Others keep their efficient bundles. Each item of the excluded bidder's
    bundle, in ascending order, goes as a singleton to the highest-valuing
    bidder still holding nothing (lowest index on ties). Without an explicit
    ``efficient`` allocation the itemized menu is used.
    """
    if not 0 <= excluded < v.n_bidders:
        raise ParameterError(f"bidder {excluded} out of range")
    if efficient is None:
        efficient = efficient_surplus(v, Menu.singletons(v.n_items))[1]
    kept: list[tuple[Bundle, int]] = []
    freed: list[int] = []
    holders = set()
    for b, n in efficient.assignments:
        if n is None:
            continue
        if n == excluded:
            freed.extend(b)
        else:
            kept.append((b, n))
            holders.add(n)
    unassigned = [n for n in range(v.n_bidders) if n != excluded and n not in holders]
    for o in sorted(freed):
        if not unassigned:
            break
        col = v.values[unassigned, 1 << o]
        pick = unassigned[int(np.argmax(col))]
        kept.append((Bundle([o]), pick))
        unassigned.remove(pick)
    value = float(sum(v.value(n, b) for b, n in kept))
    return Allocation(tuple(kept), value)


def vcg_floor_revenue(v: ValuationProfile, efficient: Allocation) -> float:
    """Sum over bidders of floor-allocation welfare minus others' efficient welfare."""
    total = 0.0
    for n in range(v.n_bidders):
        floor = vcg_floor_allocation(v, n, efficient)
        total += floor.value - others_welfare(v, efficient, n)
    return total


def second_price_grand_bundle(v: ValuationProfile) -> MechanismOutcome:
    grand = (1 << v.n_items) - 1
    col = v.values[:, grand]
    winner = int(np.argmax(col))
    price = float(np.sort(col)[-2]) if v.n_bidders > 1 else 0.0
    payments = [0.0] * v.n_bidders
    payments[winner] = price
    alloc = Allocation(((Bundle(range(v.n_items)), winner),), float(col[winner]))
    return MechanismOutcome(alloc, tuple(payments), price, float(col[winner]))
