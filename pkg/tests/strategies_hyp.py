"""Shared hypothesis strategies for random menus and valuations."""
from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from casalab.core import Bundle, FeasibilityMode, Menu, ValuationProfile


@st.composite
def menus(draw, max_items: int = 4, max_size: int = 12, modes=(FeasibilityMode.DISJOINT, FeasibilityMode.QUANTITY_CAP)):
    n_items = draw(st.integers(1, max_items))
    masks = draw(st.lists(st.integers(1, (1 << n_items) - 1), min_size=1, max_size=max_size, unique=True))
    mode = draw(st.sampled_from(modes))
    return Menu(tuple(Bundle.from_mask(m) for m in masks), n_items, mode)


def dyadic(denominator: int = 16, lo: int = 0, hi: int = 16):
    return st.integers(lo, hi).map(lambda x: x / denominator)


@st.composite
def profiles(draw, n_items: int, min_bidders: int = 1, max_bidders: int = 4):
    n = draw(st.integers(min_bidders, max_bidders))
    flat = draw(st.lists(dyadic(), min_size=n << n_items, max_size=n << n_items))
    vals = np.array(flat).reshape(n, 1 << n_items)
    vals[:, 0] = 0.0
    return ValuationProfile(vals, 0.0, 1.0)


@st.composite
def menu_and_profile(draw, max_items: int = 3, max_size: int = 7, max_bidders: int = 4, modes=None):
    kw = {} if modes is None else {"modes": modes}
    menu = draw(menus(max_items, max_size, **kw))
    return menu, draw(profiles(menu.n_items, 1, max_bidders))
