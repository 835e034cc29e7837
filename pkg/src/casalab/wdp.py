"""Winner determination and efficient-surplus assignment.

``solve_wdp`` is a depth-first branch-and-bound over menu indices. Bundles with
non-positive weight are never selected: dropping one keeps a selection feasible
in both feasibility modes and cannot lower the objective. Among optimal
selections the lexicographically smallest sorted index tuple is returned; the
include-first search order visits tied selections in exactly that order, so the
first optimum found is kept.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    ENUMERATION_CAP,
    Allocation,
    FeasibilityMode,
    InfeasibleError,
    Menu,
    ParameterError,
    SelectionTable,
    SizeError,
    ValuationProfile,
    enumerate_feasible,
)

SOLVER_CAP = 24


@dataclass(frozen=True)
class WdpResult:
    selection: tuple[int, ...]
    objective: float
    node_count: int = 0


def _check_weights(menu: Menu, weights: Sequence[float]) -> list:
    w = list(weights)
    if len(w) != len(menu):
        raise ParameterError(f"expected {len(menu)} weights, got {len(w)}")
    if not all(np.isfinite(x) for x in w):
        raise ParameterError("weights must be finite")
    return w


def solve_wdp(menu: Menu, weights: Sequence[float], cap: int = SOLVER_CAP) -> WdpResult:
    """Max-weight feasible selection of menu bundles.

    Weights may be ints (e.g. price ticks) for exact arithmetic.
    """
    if len(menu) > cap:
        raise SizeError(f"menu of size {len(menu)} exceeds solver cap {cap}")
    w = _check_weights(menu, weights)
    cand = [i for i in range(len(menu)) if w[i] > 0]
    masks = [menu.masks[i] for i in cand]
    sizes = [menu.sizes[i] for i in cand]
    wc = [w[i] for i in cand]
    quantity = menu.mode is FeasibilityMode.QUANTITY_CAP
    n_items = menu.n_items
    n = len(cand)
    suffix = [0] * (n + 1)
    for j in range(n - 1, -1, -1):
        suffix[j] = suffix[j + 1] + wc[j]
    tol = 1e-9 * (1.0 + abs(suffix[0])) if isinstance(suffix[0], float) else 0

    best_val = 0
    best_sel: tuple[int, ...] = ()
    chosen: list[int] = []
    nodes = 0

    def rec(j: int, used: int, value) -> None:
        nonlocal best_val, best_sel, nodes
        nodes += 1
        if value + suffix[j] < best_val - tol:
            return
        if j == n:
            if value > best_val:
                best_val, best_sel = value, tuple(cand[c] for c in chosen)
            return
        if quantity:
            ok = used + sizes[j] <= n_items
            nxt = used + sizes[j]
        else:
            ok = not used & masks[j]
            nxt = used | masks[j]
        if ok:
            chosen.append(j)
            rec(j + 1, nxt, value + wc[j])
            chosen.pop()
        rec(j + 1, used, value)

    rec(0, 0, 0)
    return WdpResult(best_sel, best_val, nodes)


def brute_force_wdp(menu: Menu, weights: Sequence[float], cap: int = ENUMERATION_CAP) -> WdpResult:
    """Enumeration oracle with the same tie rule (positive-weight optimal selections only)."""
    w = _check_weights(menu, weights)
    best_val, best_sel, count = 0, (), 0
    for sel in enumerate_feasible(menu, cap):
        count += 1
        if any(w[i] <= 0 for i in sel):
            continue
        val = 0
        for i in sel:
            val += w[i]
        if val > best_val:
            best_val, best_sel = val, sel
    return WdpResult(best_sel, best_val, count)


def in_some_optimum(menu: Menu, weights: Sequence[float], index: int, cap: int = SOLVER_CAP) -> bool:
    """True iff bundle ``index`` belongs to at least one maximizing selection."""
    w = _check_weights(menu, weights)
    best = solve_wdp(menu, w, cap).objective
    rest = [j for j in range(len(menu)) if j != index]
    if menu.mode is FeasibilityMode.QUANTITY_CAP:
        room = menu.n_items - menu.sizes[index]
        if room < 0:
            return False
        alt = _quantity_wdp_value([menu.sizes[j] for j in rest], [w[j] for j in rest], room)
        return w[index] + alt >= best
    sub = [j for j in rest if not menu.masks[j] & menu.masks[index]]
    if not sub:
        return w[index] >= best
    sub_menu = Menu(tuple(menu.bundles[j] for j in sub), menu.n_items, menu.mode)
    alt = solve_wdp(sub_menu, [w[j] for j in sub], cap).objective
    return w[index] + alt >= best


def _quantity_wdp_value(sizes: list[int], weights: list, capacity: int):
    """0/1 knapsack optimum over positive weights."""
    best = [0] * (capacity + 1)
    for s, x in zip(sizes, weights):
        if x <= 0 or s > capacity:
            continue
        for c in range(capacity, s - 1, -1):
            cand = best[c - s] + x
            if cand > best[c]:
                best[c] = cand
    return best[capacity]


def match_bundles_to_bidders(
    selection: Sequence[int], values: np.ndarray
) -> tuple[float, tuple[int, ...]]:
    """Injective assignment of selected bundles to bidders maximizing total value.

    ``values`` is the ``(N, |menu|)`` bidder-by-bundle matrix. Returns the total
    and, per selected bundle, the assigned bidder.
    """
    sel = list(selection)
    n_bidders = values.shape[0]
    if len(sel) > n_bidders:
        raise InfeasibleError(f"{len(sel)} bundles cannot go to {n_bidders} distinct bidders")
    if not sel:
        return 0.0, ()
    weights = values[:, sel].T
    rows, cols = linear_sum_assignment(weights, maximize=True)
    assigned = [0] * len(sel)
    for r, c in zip(rows, cols):
        assigned[r] = int(c)
    total = 0.0
    for r, c in enumerate(assigned):
        total += float(weights[r, c])
    return total, tuple(assigned)


def brute_force_matching(selection: Sequence[int], values: np.ndarray) -> float:
    """Permutation search oracle for ``match_bundles_to_bidders``."""
    sel = list(selection)
    best = 0.0
    for perm in itertools.permutations(range(values.shape[0]), len(sel)):
        total = 0.0
        for b, n in zip(sel, perm):
            total += float(values[n, b])
        best = max(best, total)
    return best


def efficient_surplus(
    v: ValuationProfile, menu: Menu, method: str = "auto", cap: int = ENUMERATION_CAP
) -> tuple[float, Allocation]:
    """Best feasible selection with distinct bidders per bundle.

    ``method="dp"`` (default for disjoint menus) runs a bidder-by-bidder dynamic
    program over item subsets; ``"matching"`` enumerates feasible selections and
    solves a bipartite matching for each.
    """
    if v.n_items != menu.n_items:
        raise ParameterError("valuation profile and menu disagree on the item count")
    if method == "auto":
        method = "dp" if menu.mode is FeasibilityMode.DISJOINT else "matching"
    if method == "dp":
        if menu.mode is not FeasibilityMode.DISJOINT:
            raise ParameterError("subset DP requires a disjoint-mode menu")
        return _surplus_dp(v, menu)
    if method != "matching":
        raise ParameterError(f"unknown method {method!r}")
    values = v.on_menu(menu)
    best, best_sel, best_assign = 0.0, (), ()
    for sel in enumerate_feasible(menu, cap):
        if len(sel) > v.n_bidders:
            continue
        total, assign = match_bundles_to_bidders(sel, values)
        if total > best:
            best, best_sel, best_assign = total, sel, assign
    alloc = Allocation(
        tuple((menu.bundles[i], n) for i, n in zip(best_sel, best_assign)), best
    )
    return best, alloc


def _subset_tables(menu: Menu) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``fits[mask, i]``: bundle i lies inside mask; ``rest[mask, i] = mask ^ bundle``."""
    full = 1 << menu.n_items
    masks = np.arange(full)[:, None]
    bms = np.asarray(menu.masks)[None, :]
    fits = (masks & bms) == bms
    rest = np.where(fits, masks ^ bms, 0)
    return fits, rest, np.asarray(menu.masks)


def _surplus_dp(v: ValuationProfile, menu: Menu) -> tuple[float, Allocation]:
    # f[mask]: best value over bidders seen so far using only items in mask
    fits, rest, bms = _subset_tables(menu)
    f = np.zeros(fits.shape[0])
    choice = []
    for n in range(v.n_bidders):
        cand = np.where(fits, f[rest] + v.values[n, bms][None, :], -np.inf)
        pick = np.argmax(cand, axis=1)  # first menu index among ties
        best = cand[np.arange(len(f)), pick]
        improve = best > f
        choice.append(np.where(improve, pick, -1))
        f = np.where(improve, best, f)
    mask, assignments = fits.shape[0] - 1, []
    for n in range(v.n_bidders - 1, -1, -1):
        i = int(choice[n][mask])
        if i >= 0:
            assignments.append((menu.bundles[i], n))
            mask ^= menu.masks[i]
    assignments.sort(key=lambda a: menu.bundles.index(a[0]))
    total = float(f[-1])
    return total, Allocation(tuple(assignments), total)


def brute_force_surplus(v: ValuationProfile, menu: Menu, cap: int = ENUMERATION_CAP) -> float:
    """Selections times injective assignments, both enumerated."""
    values = v.on_menu(menu)
    best = 0.0
    for sel in enumerate_feasible(menu, cap):
        if len(sel) <= v.n_bidders:
            best = max(best, brute_force_matching(sel, values))
    return best


def batch_surplus(values: np.ndarray, menu: Menu) -> np.ndarray:
    """Vectorized subset DP: ``values`` has shape ``(T, N, 2^M)``; returns ``(T,)``."""
    if menu.mode is not FeasibilityMode.DISJOINT:
        raise ParameterError("batch_surplus requires a disjoint-mode menu")
    fits, rest, bms = _subset_tables(menu)
    f = np.zeros((values.shape[0], fits.shape[0]))
    for n in range(values.shape[1]):
        cand = np.where(fits[None], f[:, rest] + values[:, n, bms][:, None, :], -np.inf)
        f = np.maximum(f, cand.max(axis=2))
    return f[:, -1]


def batch_quantity_surplus(values: np.ndarray, n_items: int) -> np.ndarray:
    """Efficient surplus over the complete quantity-capped menu for size-only values.

    Values must depend on bundle size alone. Each bidder takes at most one
    bundle; at most ``M // s`` bundles of size ``s`` fit, never more than the
    ``C(M, s)`` distinct ones available, so a capacity DP over bidders is exact.
    ``values``: ``(T, N, 2^M)``.
    """
    full = 1 << n_items
    sizes = np.array([bin(m).count("1") for m in range(full)])
    reps = [(1 << s) - 1 for s in range(1, n_items + 1)]
    per_size = values[:, :, reps]  # (T, N, M)
    if not np.array_equal(values[:, :, 1:], per_size[:, :, sizes[1:] - 1]):
        raise ParameterError("values must depend only on bundle size")
    f = np.zeros((values.shape[0], n_items + 1))
    for n in range(values.shape[1]):
        g = f.copy()
        for c in range(1, n_items + 1):
            for s in range(1, c + 1):
                np.maximum(g[:, c], f[:, c - s] + per_size[:, n, s - 1], out=g[:, c])
        f = g
    return f[:, n_items]


def best_single_value(vector: np.ndarray, menu: Menu, cap: int = SOLVER_CAP) -> float:
    """Restricted-menu optimum for one bidder's valuation vector (indexed by mask)."""
    return float(solve_wdp(menu, [float(vector[m]) for m in menu.masks], cap).objective)


def best_complete_value(vector: np.ndarray, n_items: int, mode: FeasibilityMode) -> float:
    """Complete-menu optimum for one vector, by DP rather than search.

    Disjoint: best partition of a subset of items (submask DP). Quantity cap:
    0/1 knapsack over all non-empty bundles with capacity ``n_items``.
    """
    full = (1 << n_items) - 1
    if FeasibilityMode(mode) is FeasibilityMode.QUANTITY_CAP:
        sizes = [bin(m).count("1") for m in range(1, full + 1)]
        return float(_quantity_wdp_value(sizes, [float(vector[m]) for m in range(1, full + 1)], n_items))
    best = [0.0] * (full + 1)
    for mask in range(1, full + 1):
        low = mask & -mask
        rest = mask ^ low
        # either the lowest item is unallocated, or it sits in some bundle sub ⊆ mask
        val = best[rest]
        sub = rest
        while True:
            b = sub | low
            cand = float(vector[b]) + best[mask ^ b]
            if cand > val:
                val = cand
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[mask] = val
    return best[full]


def selection_table(menu: Menu, cap: int = ENUMERATION_CAP) -> SelectionTable:
    return SelectionTable.build(menu, cap)


__all__ = [
    "SOLVER_CAP",
    "WdpResult",
    "solve_wdp",
    "brute_force_wdp",
    "in_some_optimum",
    "match_bundles_to_bidders",
    "brute_force_matching",
    "efficient_surplus",
    "brute_force_surplus",
    "batch_surplus",
    "batch_quantity_surplus",
    "best_single_value",
    "best_complete_value",
    "selection_table",
]
