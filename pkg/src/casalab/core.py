"""Domain primitives: items, bundles, valuations, menus and feasible allocations.

Items are indexed ``0..M-1``. A bundle is an immutable set of item indices and
doubles as a bitmask (``bundle.mask``) so valuation vectors can be stored as
dense arrays indexed by mask.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

ENUMERATION_CAP = 20


class CasaError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(CasaError, ValueError):
    pass


class SizeError(CasaError):
    """Instance exceeds the configured enumeration/solver cap."""


class InfeasibleError(CasaError):
    pass


class Bundle(frozenset):
    """A set of item indices with a canonical sorted representation."""

    def __new__(cls, members: Iterable[int] = ()):
        members = [int(m) for m in members]
        if any(m < 0 for m in members):
            raise ParameterError(f"negative item index in {members}")
        return super().__new__(cls, members)

    @classmethod
    def from_mask(cls, mask: int) -> "Bundle":
        return cls(i for i in range(mask.bit_length()) if mask >> i & 1)

    @property
    def mask(self) -> int:
        m = 0
        for i in self:
            m |= 1 << i
        return m

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(sorted(self))

    def __repr__(self) -> str:
        return "Bundle(" + ",".join(map(str, self.members)) + ")"


class FeasibilityMode(str, enum.Enum):
    DISJOINT = "disjoint"
    QUANTITY_CAP = "quantity_cap"


@dataclass(frozen=True)
class Menu:
    """Ordered list of distinct non-empty bundles offered for bidding."""

    bundles: tuple[Bundle, ...]
    n_items: int
    mode: FeasibilityMode = FeasibilityMode.DISJOINT

    def __post_init__(self):
        bundles = tuple(Bundle(b) for b in self.bundles)
        object.__setattr__(self, "bundles", bundles)
        object.__setattr__(self, "mode", FeasibilityMode(self.mode))
        if not bundles:
            raise ParameterError("menu must contain at least one bundle")
        if len(set(bundles)) != len(bundles):
            raise ParameterError("menu contains duplicate bundles")
        for b in bundles:
            if not b:
                raise ParameterError("empty bundle in menu")
            if max(b) >= self.n_items:
                raise ParameterError(f"{b!r} references an item outside 0..{self.n_items - 1}")
        object.__setattr__(self, "_masks", tuple(b.mask for b in bundles))
        object.__setattr__(self, "_sizes", tuple(len(b) for b in bundles))

    def __len__(self) -> int:
        return len(self.bundles)

    def __iter__(self) -> Iterator[Bundle]:
        return iter(self.bundles)

    @property
    def masks(self) -> tuple[int, ...]:
        return self._masks

    @property
    def sizes(self) -> tuple[int, ...]:
        return self._sizes

    def index(self, bundle: Iterable[int]) -> int:
        return self.bundles.index(Bundle(bundle))

    @classmethod
    def singletons(cls, n_items: int) -> "Menu":
        return cls(tuple(Bundle([i]) for i in range(n_items)), n_items)

    @classmethod
    def grand(cls, n_items: int) -> "Menu":
        return cls((Bundle(range(n_items)),), n_items)

    @classmethod
    def complete(cls, n_items: int, mode: FeasibilityMode = FeasibilityMode.DISJOINT) -> "Menu":
        """All ``2^M - 1`` non-empty bundles, ordered by mask."""
        return cls(tuple(Bundle.from_mask(m) for m in range(1, 1 << n_items)), n_items, mode)


@dataclass(frozen=True)
class ValuationProfile:
    """Dense valuations ``values[n, mask]`` for every bidder and bundle.

    The empty bundle is always worth 0; every other entry lies in
    ``[v_lo, v_hi]``.
    """

    values: np.ndarray
    v_lo: float = 0.0
    v_hi: float = 1.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] & (vals.shape[1] - 1) or vals.shape[1] < 2:
            raise ParameterError("values must have shape (N, 2^M) with M >= 1")
        if not 0 <= self.v_lo <= self.v_hi:
            raise ParameterError("need 0 <= v_lo <= v_hi")
        if np.any(vals[:, 0] != 0):
            raise ParameterError("empty bundle must be valued 0")
        rest = vals[:, 1:]
        if rest.size and (rest.min() < self.v_lo or rest.max() > self.v_hi):
            raise ParameterError("bundle value outside [v_lo, v_hi]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_bidders(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1].bit_length() - 1

    def value(self, bidder: int, bundle: Iterable[int] | int) -> float:
        mask = bundle if isinstance(bundle, int) else Bundle(bundle).mask
        return float(self.values[bidder, mask])

    def on_menu(self, menu: Menu) -> np.ndarray:
        """``(N, |menu|)`` matrix of bidder values for the menu bundles."""
        return self.values[:, list(menu.masks)]

    def without(self, bidder: int) -> "ValuationProfile":
        keep = [n for n in range(self.n_bidders) if n != bidder]
        return ValuationProfile(self.values[keep], self.v_lo, self.v_hi)

    def scaled(self, c: float) -> "ValuationProfile":
        return ValuationProfile(self.values * c, self.v_lo * c, self.v_hi * c)

    @classmethod
    def from_sparse(
        cls,
        n_items: int,
        tables: Sequence[Mapping[Iterable[int], float]],
        v_lo: float = 0.0,
        v_hi: float = 1.0,
    ) -> "ValuationProfile":
        """Bundles absent from a bidder's table default to ``v_lo``."""
        vals = np.full((len(tables), 1 << n_items), float(v_lo))
        vals[:, 0] = 0.0
        for n, table in enumerate(tables):
            for bundle, v in table.items():
                b = Bundle(bundle)
                if not b:
                    raise ParameterError("cannot assign a value to the empty bundle")
                if max(b) >= n_items:
                    raise ParameterError(f"{b!r} references an item outside 0..{n_items - 1}")
                vals[n, b.mask] = v
        return cls(vals, v_lo, v_hi)


@dataclass(frozen=True)
class Allocation:
    """Bundles paired with the bidder receiving them (``None`` = unassigned)."""

    assignments: tuple[tuple[Bundle, int | None], ...]
    value: float = 0.0

    @property
    def bundles(self) -> tuple[Bundle, ...]:
        return tuple(b for b, _ in self.assignments)

    def bidder_of(self, bundle: Iterable[int]) -> int | None:
        b = Bundle(bundle)
        for bb, n in self.assignments:
            if bb == b:
                return n
        raise KeyError(b)

    def by_bidder(self) -> dict[int, list[Bundle]]:
        out: dict[int, list[Bundle]] = {}
        for b, n in self.assignments:
            if n is not None:
                out.setdefault(n, []).append(b)
        return out


def kth_highest(values: Sequence[float] | np.ndarray, k: int) -> float:
    """k-th largest element, counting multiplicity."""
    vals = np.asarray(values, dtype=float).ravel()
    if not 1 <= k <= vals.size:
        raise ParameterError(f"k={k} out of range 1..{vals.size}")
    return float(np.sort(vals)[::-1][k - 1])


def kth_highest_per_bundle(matrix: np.ndarray, k: int) -> np.ndarray:
    """k-th highest along the bidder axis (axis -2) of ``(..., N, B)`` arrays."""
    n = matrix.shape[-2]
    if not 1 <= k <= n:
        raise ParameterError(f"k={k} out of range 1..{n}")
    return np.partition(matrix, n - k, axis=-2).take(n - k, axis=-2)


def _check_indices(menu: Menu, selection: Iterable[int]) -> list[int]:
    sel = [int(i) for i in selection]
    for i in sel:
        if not 0 <= i < len(menu):
            raise ParameterError(f"bundle index {i} out of range for menu of size {len(menu)}")
    if len(set(sel)) != len(sel):
        raise ParameterError("selection repeats a bundle index")
    return sel


def feasible(menu: Menu, selection: Iterable[int]) -> bool:
    sel = _check_indices(menu, selection)
    if menu.mode is FeasibilityMode.QUANTITY_CAP:
        return sum(menu.sizes[i] for i in sel) <= menu.n_items
    used = 0
    for i in sel:
        m = menu.masks[i]
        if used & m:
            return False
        used |= m
    return True


def enumerate_feasible(menu: Menu, cap: int = ENUMERATION_CAP) -> Iterator[tuple[int, ...]]:
    """Yield every feasible selection once, in lexicographic order of index tuples."""
    if len(menu) > cap:
        raise SizeError(f"menu of size {len(menu)} exceeds enumeration cap {cap}")
    masks, sizes, n = menu.masks, menu.sizes, len(menu)
    quantity = menu.mode is FeasibilityMode.QUANTITY_CAP
    cap_items = menu.n_items

    def rec(prefix: list[int], start: int, used: int, count: int) -> Iterator[tuple[int, ...]]:
        yield tuple(prefix)
        for i in range(start, n):
            if quantity:
                if count + sizes[i] > cap_items:
                    continue
                prefix.append(i)
                yield from rec(prefix, i + 1, used, count + sizes[i])
            else:
                if used & masks[i]:
                    continue
                prefix.append(i)
                yield from rec(prefix, i + 1, used | masks[i], count)
            prefix.pop()

    yield from rec([], 0, 0, 0)


@dataclass(frozen=True)
class SelectionTable:
    """Incidence matrix of all feasible selections, for batched objectives."""

    selections: tuple[tuple[int, ...], ...]
    incidence: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, menu: Menu, cap: int = ENUMERATION_CAP) -> "SelectionTable":
        sels = tuple(enumerate_feasible(menu, cap))
        inc = np.zeros((len(sels), len(menu)))
        for r, s in enumerate(sels):
            inc[r, list(s)] = 1.0
        return cls(sels, inc)

    def best_values(self, weights: np.ndarray) -> np.ndarray:
        """Max over feasible selections of summed weights, for ``(..., |menu|)`` weights."""
        return (np.asarray(weights) @ self.incidence.T).max(axis=-1)
