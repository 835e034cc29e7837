"""Rank guarantees, surplus benchmarks and Monte Carlo bound checks.

Samplers take ``(seed, trial)`` and build their generator from both, so any
trial can be regenerated on its own and batches are order-independent.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    CasaError,
    FeasibilityMode,
    Menu,
    ParameterError,
    SelectionTable,
    ValuationProfile,
    kth_highest_per_bundle,
)
from .engine import Transcript
from .wdp import batch_surplus, efficient_surplus, solve_wdp

MC_TOLERANCE_SE = 3.0
BOUND_TOLERANCE = 1e-9


class DistributionError(CasaError):
    pass


def rank_guarantee(v: ValuationProfile, menu: Menu, k: int) -> float:
    """Best feasible selection pricing every bundle at its k-th highest value."""
    if not 1 <= k <= v.n_bidders:
        raise ParameterError(f"k={k} out of range 1..{v.n_bidders}")
    weights = kth_highest_per_bundle(v.on_menu(menu), k)
    return float(solve_wdp(menu, [float(x) for x in weights]).objective)


@dataclass(frozen=True)
class RevenueVerdict:
    ok: bool
    revenue: float
    guarantee: float
    bound: float
    k: int
    vacuous: bool = False

    def to_json(self) -> dict:
        return asdict(self)


def revenue_bound(revenue: float, v: ValuationProfile, menu: Menu, epsilon: float, k: int) -> RevenueVerdict:
    """``revenue >= R^k - |menu|·eps``; for ``k > N`` only non-negativity is asserted."""
    if k < 1:
        raise ParameterError("k must be positive")
    if k > v.n_bidders:
        return RevenueVerdict(revenue >= -BOUND_TOLERANCE, revenue, 0.0, 0.0, k, vacuous=True)
    g = rank_guarantee(v, menu, k)
    bound = g - len(menu) * epsilon
    return RevenueVerdict(revenue >= bound - BOUND_TOLERANCE, revenue, g, bound, k)


def casa_revenue_bound_check(transcript: Transcript, k_effective: int | None = None) -> RevenueVerdict:
    """Check a finished run against its rank guarantee (default k = |menu|+1)."""
    from .transcript import scenario_from_config

    if transcript.outcome is None:
        raise ParameterError("transcript has no outcome")
    menu, grid, vals = scenario_from_config(transcript.config)
    k = len(menu) + 1 if k_effective is None else k_effective
    return revenue_bound(transcript.outcome.revenue, vals, menu, grid.epsilon, k)


# --------------------------------------------------------------------------
# distributions

KINDS = ("iid", "max_correlated", "fstar", "custom")


@dataclass(frozen=True)
class DistributionSpec:
    """Joint valuation distribution over ``n_bidders`` bidders.

    * ``iid``: every bidder, every bundle in ``support`` uniform on ``[v_lo, v_hi]``.
    * ``max_correlated``: one vector from ``base`` (default: ``iid`` for one bidder),
      copied to all bidders.
    * ``fstar``: the worst case for the k-th guarantee on ``target``; see ``build_fstar``.
    * ``custom``: ``sampler(rng, n_bidders)`` returns an ``(N, 2^M)`` array.

    Bundles outside ``support`` are worth ``v_lo``.
    """

    kind: str
    n_items: int
    n_bidders: int
    v_lo: float = 0.0
    v_hi: float = 1.0
    support: tuple[int, ...] | None = None
    k: int | None = None
    target: int | None = None
    base: Callable[[np.random.Generator], np.ndarray] | None = field(default=None, compare=False)
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = field(default=None, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        if self.n_bidders < 1 or self.n_items < 1:
            raise ParameterError("need at least one bidder and one item")
        if not self.v_lo <= self.v_hi:
            raise ParameterError("v_lo must not exceed v_hi")
        if self.kind == "custom" and self.sampler is None:
            raise ParameterError("custom distributions need a sampler")
        if self.kind == "fstar" and (self.k is None or self.target is None):
            raise ParameterError("fstar needs k and a target bundle")

    @property
    def masks(self) -> tuple[int, ...]:
        if self.support is not None:
            return self.support
        return tuple(range(1, 1 << self.n_items))

    def _iid_vector(self, rng: np.random.Generator, rows: int) -> np.ndarray:
        out = np.full((rows, 1 << self.n_items), self.v_lo)
        masks = list(self.masks)
        out[:, masks] = self.v_lo + (self.v_hi - self.v_lo) * rng.random((len(masks), rows)).T
        out[:, 0] = 0.0
        return out

    def sample_array(self, seed: int, trial: int) -> np.ndarray:
        rng = np.random.default_rng([seed, trial])
        n = self.n_bidders
        if self.kind == "iid":
            out = self._iid_vector(rng, n)
        elif self.kind == "max_correlated":
            if self.base is None:
                row = self._iid_vector(rng, 1)[0]
            else:
                row = np.asarray(self.base(rng), dtype=float)
            out = np.tile(row, (n, 1))
        elif self.kind == "fstar":
            out = _fstar_draw(rng, n, self.k, self.target, self.n_items, self.v_lo, self.v_hi)
        else:
            out = np.asarray(self.sampler(rng, n), dtype=float)
        if out.shape != (n, 1 << self.n_items):
            raise DistributionError(f"sampler returned shape {out.shape}")
        if np.any(out[:, 1:] < self.v_lo - 1e-12) or np.any(out > self.v_hi + 1e-12):
            raise DistributionError("sample outside [v_lo, v_hi]")
        return out

    def sample(self, seed: int, trial: int) -> ValuationProfile:
        return ValuationProfile(self.sample_array(seed, trial), self.v_lo, self.v_hi)

    def sample_batch(self, seed: int, trials: int, start: int = 0) -> np.ndarray:
        return np.stack([self.sample_array(seed, t) for t in range(start, start + trials)])

    def describe(self) -> dict:
        d = {
            "kind": self.kind,
            "n_items": self.n_items,
            "n_bidders": self.n_bidders,
            "v_lo": self.v_lo,
            "v_hi": self.v_hi,
        }
        if self.support is not None:
            d["support"] = list(self.support)
        if self.k is not None:
            d["k"] = self.k
        if self.target is not None:
            d["target"] = self.target
        if self.label:
            d["label"] = self.label
        return d


def _fstar_draw(rng, n, k, target, n_items, v_lo, v_hi) -> np.ndarray:
    # the shared low draw comes first so that a max-correlated uniform sampler
    # fed the same (seed, trial) sees the same first uniform
    q = (k - 1) / n
    span = v_hi - v_lo
    low = v_lo + span * (1 - q) * rng.random()
    high = v_lo + span * (1 - q + q * rng.random())
    group = rng.choice(n, size=k - 1, replace=False)
    out = np.full((n, 1 << n_items), v_lo)
    out[:, 0] = 0.0
    out[:, target] = low
    out[group, target] = high
    return out


def uniform_target(n_items: int, target: int, v_lo: float = 0.0, v_hi: float = 1.0):
    """Base vector sampler: only ``target`` is valuable, uniform on ``[v_lo, v_hi]``."""

    def base(rng: np.random.Generator) -> np.ndarray:
        row = np.full(1 << n_items, v_lo)
        row[0] = 0.0
        row[target] = v_lo + (v_hi - v_lo) * rng.random()
        return row

    return base


def build_fstar(k: int, n_bidders: int, target: int | Sequence[int], n_items: int | None = None,
                v_hi: float = 1.0) -> DistributionSpec:
    """Worst-case distribution for the k-th guarantee on a single bundle.

    A uniformly random group of ``k-1`` bidders shares one high value, uniform
    on ``[1-q, 1]·v_hi`` with ``q = (k-1)/N``; everyone else shares one low value,
    uniform on ``[0, 1-q]·v_hi``. All other bundles are worthless. The pooled
    per-bidder marginal on ``target`` is uniform on ``[0, v_hi]``.
    """
    if not 2 <= k <= n_bidders:
        raise ParameterError(f"need 2 <= k <= N, got k={k}, N={n_bidders}")
    mask = target if isinstance(target, int) else sum(1 << int(i) for i in target)
    if mask <= 0:
        raise ParameterError("target bundle must be non-empty")
    if n_items is None:
        n_items = mask.bit_length()
    if mask >= 1 << n_items:
        raise ParameterError("target bundle outside the item set")
    return DistributionSpec(
        "fstar", n_items, n_bidders, 0.0, v_hi, support=(mask,), k=k, target=mask,
        label=f"fstar(k={k},N={n_bidders})",
    )


def fstar_expected_guarantee(k: int, n_bidders: int, v_hi: float = 1.0) -> float:
    return v_hi * (0.5 - (k - 1) / (2 * n_bidders))


# --------------------------------------------------------------------------
# Monte Carlo reports


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@dataclass(frozen=True)
class BoundReport:
    """Both sides of a per-distribution inequality, estimated by Monte Carlo.

    ``verdict`` holds when ``diff_mean + slack >= -3·diff_se`` where ``diff`` is
    the per-trial difference between ``rank`` and the ``benchmark`` column.
    """

    label: str
    trials: int
    k: int
    n_bidders: int
    menu_size: int
    v_hi: float
    rank_mean: float
    rank_se: float
    random_bidder_mean: float
    random_bidder_se: float
    surplus_mean: float | None
    surplus_se: float | None
    slack: float
    benchmark: str
    diff_mean: float
    diff_se: float
    verdict: bool
    spot_check: bool = False

    @property
    def margin(self) -> float:
        return self.diff_mean + self.slack

    def to_json(self) -> dict:
        d = asdict(self)
        d["margin"] = self.margin
        return d


def slack_term(k: int, menu_size: int, v_hi: float, n_bidders: int) -> float:
    return (k - 1) * menu_size * v_hi / n_bidders


@dataclass(frozen=True)
class TrialColumns:
    rank: np.ndarray
    random_bidder: np.ndarray
    surplus: np.ndarray | None


def trial_columns(values: np.ndarray, menu: Menu, k: int, with_surplus: bool = True,
                  table: SelectionTable | None = None) -> TrialColumns:
    """Per-trial R^k, random-bidder restricted optimum and efficient surplus.

    ``values`` has shape ``(T, N, 2^M)``. The random-bidder column averages,
    over bidders, each bidder's own best feasible selection.
    """
    table = table or SelectionTable.build(menu)
    on_menu = values[:, :, list(menu.masks)]
    rank = table.best_values(kth_highest_per_bundle(on_menu, k))
    random_bidder = table.best_values(on_menu).mean(axis=1)
    surplus = None
    if with_surplus:
        if menu.mode is FeasibilityMode.DISJOINT:
            surplus = batch_surplus(values, menu)
        else:
            surplus = np.array([
                efficient_surplus(ValuationProfile(v, float(v.min()), float(v.max())), menu)[0]
                for v in values
            ])
    return TrialColumns(rank, random_bidder, surplus)


def _report(label, cols: TrialColumns, k, n, menu_size, v_hi, benchmark, spot_check=False) -> BoundReport:
    slack = slack_term(k, menu_size, v_hi, n)
    ref = cols.random_bidder if benchmark == "random_bidder" else cols.surplus
    diff = cols.rank - ref
    d_mean, d_se = _mean_se(diff)
    r_mean, r_se = _mean_se(cols.rank)
    b_mean, b_se = _mean_se(cols.random_bidder)
    s_mean = s_se = None
    if cols.surplus is not None:
        s_mean, s_se = _mean_se(cols.surplus)
    ok = d_mean + slack >= -MC_TOLERANCE_SE * d_se - BOUND_TOLERANCE
    return BoundReport(label, int(cols.rank.size), k, n, menu_size, v_hi, r_mean, r_se, b_mean, b_se,
                       s_mean, s_se, slack, benchmark, d_mean, d_se, bool(ok), spot_check)


def theorem2_check(spec: DistributionSpec, menu: Menu, k: int, trials: int, seed: int = 0,
                   with_surplus: bool = True) -> BoundReport:
    """``E[R^k] >= E[random bidder's best selection] - (k-1)|menu|v_hi/N`` within 3 SE."""
    if trials < 2:
        raise ParameterError("need at least two trials")
    if not 1 <= k <= spec.n_bidders:
        raise ParameterError(f"k={k} out of range 1..{spec.n_bidders}")
    if spec.n_items != menu.n_items:
        raise ParameterError("distribution and menu disagree on the item count")
    cols = trial_columns(spec.sample_batch(seed, trials), menu, k, with_surplus)
    return _report(spec.label or spec.kind, cols, k, spec.n_bidders, len(menu), spec.v_hi, "random_bidder")


@dataclass(frozen=True)
class FamilyReport:
    """Minimum over a finite family of both sides, plus the member reports.

    A spot check only: the family's minima say nothing about the true infimum.
    """

    members: tuple[BoundReport, ...]
    min_rank: float
    min_surplus: float
    slack: float
    gap: float
    gap_se: float
    verdict: bool
    spot_check: bool = True

    def to_json(self) -> dict:
        return {
            "members": [m.to_json() for m in self.members],
            "min_rank": self.min_rank,
            "min_surplus": self.min_surplus,
            "slack": self.slack,
            "gap": self.gap,
            "gap_se": self.gap_se,
            "verdict": self.verdict,
            "spot_check": self.spot_check,
        }


def surplus_gap_report(specs: Sequence[DistributionSpec], menu: Menu, k: int, trials: int,
                       seed: int = 0) -> FamilyReport:
    """``min_F E[R^k] >= min_F V(F) - slack`` over a family, estimated with common seeds."""
    if not specs:
        raise ParameterError("empty family")
    n = specs[0].n_bidders
    if any(s.n_bidders != n for s in specs):
        raise ParameterError("family members must share the bidder count")
    v_hi = max(s.v_hi for s in specs)
    table = SelectionTable.build(menu)
    members, cols_all = [], []
    for s in specs:
        cols = trial_columns(s.sample_batch(seed, trials), menu, k, True, table)
        cols_all.append(cols)
        members.append(_report(s.label or s.kind, cols, k, n, len(menu), s.v_hi, "random_bidder", True))
    ranks = [c.rank.mean() for c in cols_all]
    surps = [c.surplus.mean() for c in cols_all]
    i_r, i_s = int(np.argmin(ranks)), int(np.argmin(surps))
    gap_trials = cols_all[i_s].surplus - cols_all[i_r].rank
    gap, gap_se = _mean_se(gap_trials)
    slack = slack_term(k, len(menu), v_hi, n)
    ok = -gap + slack >= -MC_TOLERANCE_SE * gap_se - BOUND_TOLERANCE
    return FamilyReport(tuple(members), float(ranks[i_r]), float(surps[i_s]), slack, gap, gap_se, bool(ok))


@dataclass(frozen=True)
class SweepReport:
    n_values: tuple[int, ...]
    gaps: tuple[float, ...]
    gap_ses: tuple[float, ...]
    slope: float

    def to_json(self) -> dict:
        return {"n_values": list(self.n_values), "gaps": list(self.gaps),
                "gap_ses": list(self.gap_ses), "slope": self.slope}


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    ys = np.asarray(ys, dtype=float)
    if np.any(ys <= 0):
        raise ParameterError("log-log slope needs positive gaps")
    return float(np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(ys), 1)[0])


def gap_sweep(family: Callable[[int], Sequence[DistributionSpec]], menu: Menu, k: int,
              n_values: Sequence[int], trials: int, seed: int = 0) -> SweepReport:
    """Family gap ``min V - min E[R^k]`` across bidder counts, with its log-log slope."""
    gaps, ses = [], []
    for n in n_values:
        rep = surplus_gap_report(family(n), menu, k, trials, seed)
        gaps.append(rep.gap)
        ses.append(rep.gap_se)
    return SweepReport(tuple(int(n) for n in n_values), tuple(gaps), tuple(ses), loglog_slope(n_values, gaps))


def singleton_family(k: int, target: int = 1, n_items: int = 1):
    """``{max-correlated uniform, F*}``: both have the uniform pooled marginal on ``target``."""

    def family(n: int) -> list[DistributionSpec]:
        mc = DistributionSpec("max_correlated", n_items, n, support=(target,),
                              base=uniform_target(n_items, target), label="max_correlated")
        return [mc, build_fstar(k, n, target, n_items)]

    return family


def iid_family(n_items: int = 1, support: tuple[int, ...] | None = None):
    def family(n: int) -> list[DistributionSpec]:
        return [DistributionSpec("iid", n_items, n, support=support, label="iid")]

    return family


__all__ = [
    "DistributionError",
    "rank_guarantee",
    "RevenueVerdict",
    "revenue_bound",
    "casa_revenue_bound_check",
    "DistributionSpec",
    "uniform_target",
    "build_fstar",
    "fstar_expected_guarantee",
    "BoundReport",
    "slack_term",
    "trial_columns",
    "theorem2_check",
    "FamilyReport",
    "surplus_gap_report",
    "SweepReport",
    "loglog_slope",
    "gap_sweep",
    "singleton_family",
    "iid_family",
]
