"""Named experiment suites, one per acceptance criterion.

Each suite returns a :class:`SuiteResult` whose JSON form depends only on the
suite name, seed and parameters, so reruns are byte-identical.
"""
from __future__ import annotations

import json
import zlib
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .core import Bundle, FeasibilityMode, Menu, ParameterError, ValuationProfile
from .engine import (
    BidderCountWarning,
    PriceGrid,
    Quit,
    Transcript,
    apply_action,
    new_auction,
    next_mover,
    observe,
    run,
)
from .guarantees import (
    DistributionSpec,
    build_fstar,
    fstar_expected_guarantee,
    gap_sweep,
    iid_family,
    rank_guarantee,
    revenue_bound,
    singleton_family,
    theorem2_check,
)
from .mechanisms import vcg, vcg_floor_revenue
from .menus import (
    PreferenceClass,
    build_menu,
    check_expost_sufficiency,
    gen_valuation,
    gen_vector,
    homogeneous_rank_bound_holds,
    satisfies,
    sufficiency_surplus_check,
    union_menu,
)
from .strategies import (
    CoalitionSpec,
    JumpBidder,
    NonStrategic,
    ScriptedBidder,
    SpoilerOverbidder,
    Straightforward,
    coalition_wrapper,
    nod_quit_check,
)
from .transcript import parse_transcript, replay, transcript_lines
from .wdp import (
    brute_force_surplus,
    brute_force_wdp,
    efficient_surplus,
    solve_wdp,
)

VALUE_STEP = 2.0 ** -10


@dataclass
class SuiteResult:
    name: str
    seed: int
    params: dict
    rows: list[dict]
    summary: dict
    ok: bool
    counterexamples: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "environment": {"package": "casalab", "version": __version__, "seed": self.seed},
            "suite": self.name,
            "params": self.params,
            "ok": self.ok,
            "summary": self.summary,
            "rows": self.rows,
            "counterexamples": self.counterexamples,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"


def _merge(defaults: dict, params: dict | None) -> dict:
    out = dict(defaults)
    for key, val in (params or {}).items():
        if key not in defaults:
            raise ParameterError(f"unknown suite parameter {key!r}")
        out[key] = val
    return out


# --------------------------------------------------------------------------
# random auction scenarios


@dataclass
class Scenario:
    seed: int
    menu: Menu
    grid: PriceGrid
    valuations: ValuationProfile
    strategies: list
    k: int
    n_nonstrategic: int = 0
    coalitions: CoalitionSpec | None = None


def _random_menu(rng: np.random.Generator, max_items: int, max_menu: int) -> Menu:
    n_items = int(rng.integers(1, max_items + 1))
    masks = list(range(1, 1 << n_items))
    size = int(rng.integers(1, min(max_menu, len(masks)) + 1))
    picked = sorted(int(m) for m in rng.choice(masks, size=size, replace=False))
    mode = FeasibilityMode.QUANTITY_CAP if rng.random() < 0.2 else FeasibilityMode.DISJOINT
    return Menu(tuple(Bundle.from_mask(m) for m in picked), n_items, mode)


def _random_values(rng: np.random.Generator, n_bidders: int, n_items: int) -> ValuationProfile:
    lam = rng.random()
    common = rng.random(1 << n_items)
    raw = lam * common + (1 - lam) * rng.random((n_bidders, 1 << n_items))
    vals = np.floor(raw / VALUE_STEP) * VALUE_STEP
    vals[:, 0] = 0.0
    return ValuationProfile(vals, 0.0, 1.0)


def _library_strategy(rng: np.random.Generator, values: np.ndarray, menu: Menu):
    r = rng.random()
    if r < 0.5:
        return Straightforward()
    if r < 0.8:
        return JumpBidder(float(np.round(rng.uniform(0.5, 1.0), 3)))
    target = int(rng.integers(len(menu)))
    cap = float(np.round(values[menu.masks[target]] + rng.uniform(0.0, 0.3), 3))
    return SpoilerOverbidder(target, cap)


def random_scenario(seed: int, n_nonstrategic: int = 0, coalitions: bool = False,
                    max_items: int = 3, max_menu: int = 5, max_bidders: int = 12) -> Scenario:
    """Random menu, grid, values and a mixed library strategy profile.

    ``n_nonstrategic`` bidders play arbitrary (but rule-abiding) scripts; with
    ``coalitions`` the bidders are split into random groups of size 1 to 3.
    """
    rng = np.random.default_rng([seed, 0x5CE])
    menu = _random_menu(rng, max_items, max_menu)
    eps = float(rng.choice([0.1, 0.01]))
    low = len(menu) + 1 + n_nonstrategic
    if low > max_bidders:
        raise ParameterError("bidder cap too small for the requested rank")
    n = int(rng.integers(low, max_bidders + 1))
    vals = _random_values(rng, n, menu.n_items)
    grid = PriceGrid.covering(1.0, eps)
    if coalitions:
        # redraw the partition a few times so the adjusted rank usually fits N
        for _ in range(20):
            order = [int(i) for i in rng.permutation(n)]
            groups, pos = [], 0
            while pos < n:
                size = int(rng.choice([1, 2, 3], p=[0.5, 0.35, 0.15]))
                groups.append(tuple(order[pos:pos + size]))
                pos += size
            if CoalitionSpec(tuple(groups)).effective_rank(len(menu)) <= n:
                break
        spec = CoalitionSpec(tuple(groups))
        strategies = coalition_wrapper(spec, vals)
        k = spec.effective_rank(len(menu))
        return Scenario(seed, menu, grid, vals, strategies, k, 0, spec)
    strategies = [_library_strategy(rng, vals.values[i], menu) for i in range(n)]
    for i in sorted(int(x) for x in rng.choice(n, size=n_nonstrategic, replace=False)):
        script = "quit" if rng.random() < 0.5 else "random"
        strategies[i] = NonStrategic(script)
    return Scenario(seed, menu, grid, vals, strategies, len(menu) + 1 + n_nonstrategic, n_nonstrategic)


def play(scn: Scenario) -> Transcript:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BidderCountWarning)
        return run(scn.menu, scn.grid, scn.strategies, scn.valuations, seed=scn.seed)


def audit_quits(t: Transcript, skip: set[int] = frozenset()) -> list[dict]:
    """Quits that the witness validator proves obviously dominated."""
    from .transcript import scenario_from_config

    menu, grid, vals = scenario_from_config(t.config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BidderCountWarning)
        state = new_auction(menu, grid, vals.n_bidders)
    flagged = []
    for rec in t.records:
        mover = next_mover(state)
        if isinstance(rec.action, Quit) and mover not in skip:
            obs = observe(state, mover, menu, grid, vals)
            if nod_quit_check(obs):
                flagged.append({"stage": rec.stage, "bidder": mover})
        state = apply_action(state, mover, rec.action)
    return flagged


def _revenue_rows(seeds, make: Callable[[int], Scenario], audit: bool) -> tuple[list, list]:
    rows, bad = [], []
    for s in seeds:
        scn = make(s)
        t = play(scn)
        verdict = revenue_bound(t.outcome.revenue, scn.valuations, scn.menu, scn.grid.epsilon, scn.k)
        row = {
            "seed": s,
            "n_items": scn.menu.n_items,
            "menu_size": len(scn.menu),
            "mode": scn.menu.mode.value,
            "n_bidders": scn.valuations.n_bidders,
            "epsilon": scn.grid.epsilon,
            "k": scn.k,
            "revenue": verdict.revenue,
            "guarantee": verdict.guarantee,
            "bound": verdict.bound,
            "vacuous": verdict.vacuous,
            "stages": len(t.records),
            "ok": verdict.ok,
        }
        if audit:
            skip = {i for i, st in enumerate(scn.strategies) if isinstance(st, NonStrategic)}
            row["dominated_quits"] = len(audit_quits(t, skip))
        rows.append(row)
        if not verdict.ok:
            bad.append({"seed": s, "transcript": list(transcript_lines(t))})
    return rows, bad


def _revenue_summary(rows: list[dict]) -> dict:
    slack = [r["revenue"] - r["bound"] for r in rows if not r["vacuous"]]
    return {
        "scenarios": len(rows),
        "violations": sum(not r["ok"] for r in rows),
        "vacuous": sum(r["vacuous"] for r in rows),
        "min_slack": min(slack) if slack else None,
        "mean_revenue": float(np.mean([r["revenue"] for r in rows])) if rows else None,
        "mean_guarantee": float(np.mean([r["guarantee"] for r in rows])) if rows else None,
        "dominated_quits": sum(r.get("dominated_quits", 0) for r in rows),
    }


def suite_revenue_bound(seed: int = 0, params: dict | None = None) -> SuiteResult:
    p = _merge({"scenarios": 1000, "audit": True}, params)
    seeds = [seed * 1_000_003 + i for i in range(int(p["scenarios"]))]
    rows, bad = _revenue_rows(seeds, lambda s: random_scenario(s), bool(p["audit"]))
    summary = _revenue_summary(rows)
    ok = summary["violations"] == 0 and summary["dominated_quits"] == 0
    return SuiteResult("theorem1", seed, p, rows, summary, ok, bad)


def suite_robustness(seed: int = 0, params: dict | None = None) -> SuiteResult:
    p = _merge({"scenarios": 1000, "nonstrategic": [1, 2], "coalitions": True}, params)
    n = int(p["scenarios"])
    rows, bad, parts = [], [], {}
    for j in p["nonstrategic"]:
        seeds = [seed * 1_000_003 + 10_000 * int(j) + i for i in range(n)]
        r, b = _revenue_rows(seeds, lambda s, j=int(j): random_scenario(s, n_nonstrategic=j), False)
        for row in r:
            row["variant"] = f"nonstrategic={j}"
        rows += r
        bad += b
        parts[f"nonstrategic={j}"] = _revenue_summary(r)
    if p["coalitions"]:
        seeds = [seed * 1_000_003 + 500_000 + i for i in range(n)]
        r, b = _revenue_rows(seeds, lambda s: random_scenario(s, coalitions=True), False)
        for row in r:
            row["variant"] = "coalitions"
        rows += r
        bad += b
        parts["coalitions"] = _revenue_summary(r)
    rows.sort(key=lambda r: (r["variant"], r["seed"]))
    violations = sum(v["violations"] for v in parts.values())
    return SuiteResult("robustness", seed, p, rows, {"violations": violations, "variants": parts},
                       violations == 0, bad)


# --------------------------------------------------------------------------
# distributional suites


def suite_fstar(seed: int = 0, params: dict | None = None) -> SuiteResult:
    p = _merge({"ks": [2, 3, 4, 5], "ns": [10, 20, 50], "trials": 10_000}, params)
    menu = Menu.singletons(1)
    rows = []
    for k in p["ks"]:
        for n in p["ns"]:
            cell_seed = zlib.crc32(f"{seed}/{k}/{n}".encode())
            rep = theorem2_check(build_fstar(int(k), int(n), 1, 1), menu, int(k), int(p["trials"]), cell_seed)
            expected = fstar_expected_guarantee(int(k), int(n))
            z = (rep.rank_mean - expected) / rep.rank_se if rep.rank_se > 0 else 0.0
            rows.append({
                "k": int(k), "n_bidders": int(n), "mean": rep.rank_mean, "se": rep.rank_se,
                "expected": expected, "z": z, "ok": abs(z) <= 3.0,
                "surplus_mean": rep.surplus_mean, "per_distribution_ok": rep.verdict,
            })
    failures = sum(not r["ok"] for r in rows)
    summary = {"cells": len(rows), "failures": failures, "max_abs_z": max(abs(r["z"]) for r in rows)}
    return SuiteResult("fstar", seed, p, rows, summary, failures == 0)


def _weak_substitutes_sampler(n_items: int):
    cls = PreferenceClass("weak_substitutes", n_items)

    def sampler(rng, n):
        return np.stack([gen_vector(cls, rng) for _ in range(n)])

    return sampler


def _half_shared_sampler(n_items: int):
    def sampler(rng, n):
        shared = rng.random(1 << n_items)
        out = rng.random((n, 1 << n_items))
        out[: n // 2] = shared
        out[:, 0] = 0.0
        return out

    return sampler


def distribution_grid() -> list[tuple[DistributionSpec, Menu, int]]:
    """The distributions checked against the per-distribution inequality."""
    c2, s3, g2 = Menu.complete(2), Menu.singletons(3), Menu.grand(2)
    return [
        (DistributionSpec("iid", 2, 50, label="iid/complete2/N50"), c2, 4),
        (DistributionSpec("iid", 3, 20, label="iid/singletons3/N20"), s3, 4),
        (DistributionSpec("iid", 2, 10, label="iid/grand2/N10"), g2, 2),
        (DistributionSpec("max_correlated", 2, 20, label="maxcorr/complete2/N20"), c2, 4),
        (build_fstar(3, 10, 1, 1), Menu.singletons(1), 3),
        (build_fstar(4, 40, 3, 2), g2, 4),
        (DistributionSpec("custom", 3, 12, sampler=_weak_substitutes_sampler(3),
                          label="weak_substitutes/singletons3/N12"), s3, 4),
        (DistributionSpec("custom", 2, 16, sampler=_half_shared_sampler(2),
                          label="half_shared/complete2/N16"), c2, 4),
    ]


def suite_distributional_bound(seed: int = 0, params: dict | None = None) -> SuiteResult:
    p = _merge({"trials": 10_000, "sweep_ns": [10, 20, 40, 80], "sweep_k": 3, "max_slope": -0.8}, params)
    trials = int(p["trials"])
    rows = []
    for spec, menu, k in distribution_grid():
        rows.append(theorem2_check(spec, menu, k, trials, seed).to_json())
    ns = [int(n) for n in p["sweep_ns"]]
    fam = gap_sweep(singleton_family(int(p["sweep_k"])), Menu.singletons(1), int(p["sweep_k"]), ns, trials, seed)
    iid = gap_sweep(iid_family(), Menu.singletons(1), 2, ns, trials, seed)
    slope_ok = fam.slope <= p["max_slope"] and iid.slope <= p["max_slope"]
    failures = sum(not r["verdict"] for r in rows)
    summary = {
        "distributions": len(rows),
        "failures": failures,
        "family_sweep": fam.to_json(),
        "iid_sweep": iid.to_json(),
        "slope_ok": bool(slope_ok),
    }
    return SuiteResult("theorem2", seed, p, rows, summary, failures == 0 and slope_ok)


# --------------------------------------------------------------------------
# VCG


def pair_specialists_profile(n_bidders: int = 4) -> ValuationProfile:
    """Everybody values the pair at 1; bidder 0 also values item a at 1, bidder 1 item b."""
    if n_bidders < 2:
        raise ParameterError("need the two specialists")
    v = np.zeros((n_bidders, 4))
    v[:, 3] = 1.0
    v[0, 1] = 1.0
    v[1, 2] = 1.0
    return ValuationProfile(v, 0.0, 1.0)


def _weak_substitutes_instance(seed: int, trial: int, max_items: int, max_bidders: int):
    rng = np.random.default_rng([seed, trial, 0x7C6])
    m = int(rng.integers(1, max_items + 1))
    n = int(rng.integers(m + 1, max_bidders + 1))
    return gen_valuation(PreferenceClass("weak_substitutes", m), n, seed, trial)


def suite_vcg(seed: int = 0, params: dict | None = None) -> SuiteResult:
    p = _merge({"instances": 1000, "max_items": 5, "max_bidders": 12, "family_ns": [4, 6, 8, 12]}, params)
    rows, fixture_ok = [], True
    for n in p["family_ns"]:
        v = pair_specialists_profile(int(n))
        rev = vcg(v, Menu.complete(2)).revenue
        ranks = [rank_guarantee(v, Menu.complete(2), k) for k in range(2, int(n) + 1)]
        ok = rev == 0.0 and all(r == 1.0 for r in ranks)
        fixture_ok &= ok
        rows.append({"kind": "pair_specialists", "n_bidders": int(n), "vcg_revenue": rev,
                     "min_rank": min(ranks), "max_rank": max(ranks), "ok": ok})
    violations = 0
    for t in range(int(p["instances"])):
        v = _weak_substitutes_instance(seed, t, int(p["max_items"]), int(p["max_bidders"]))
        m = v.n_items
        full = vcg(v, Menu.complete(m))
        items = vcg(v, Menu.singletons(m))
        bench = rank_guarantee(v, Menu.singletons(m), m + 1)
        floor = vcg_floor_revenue(v, full.allocation)
        chain = full.revenue >= floor - 1e-9 and floor >= bench - 1e-9
        ok = full.revenue >= bench - 1e-9 and chain
        violations += not ok
        rows.append({"kind": "weak_substitutes", "trial": t, "n_items": m, "n_bidders": v.n_bidders,
                     "vcg_revenue": full.revenue, "vcg_itemized_revenue": items.revenue,
                     "floor_revenue": floor, "rank_guarantee": bench, "ok": ok})
    summary = {"fixture_ok": bool(fixture_ok), "instances": int(p["instances"]), "violations": violations}
    return SuiteResult("vcg", seed, p, rows, summary, bool(fixture_ok) and violations == 0)


# --------------------------------------------------------------------------
# menus


def class_grid(max_items: int = 5) -> list[PreferenceClass]:
    out = []
    for m in range(1, max_items + 1):
        out.append(PreferenceClass("weak_substitutes", m))
        out.append(PreferenceClass("weak_complements", m))
        out.append(PreferenceClass("homogeneous", m))
    blocks = [((0,),), ((0, 1),), ((0, 1), (2,)), ((0,), (1,), (2,)), ((0, 2), (1, 3)),
              ((0, 1, 2), (3, 4)), ((0,), (1, 2), (3, 4))]
    for b in blocks:
        out.append(PreferenceClass("partitioned_complements", sum(len(x) for x in b), blocks=b))
    return out


def expected_rank(cls: PreferenceClass, menu_size: int) -> int:
    if cls.kind == "weak_substitutes":
        return cls.n_items + 1
    if cls.kind == "weak_complements":
        return 2
    if cls.kind == "partitioned_complements":
        return len(cls.blocks) + 1
    return menu_size + 1


def suite_sufficiency(seed: int = 0, params: dict | None = None) -> SuiteResult:
    p = _merge({"draws": 1000, "max_items": 5, "surplus_trials": 1000, "surplus_bidders": 12}, params)
    rows, failures = [], 0
    for cls in class_grid(int(p["max_items"])):
        menu, k = build_menu(cls)
        rng = np.random.default_rng([seed, hash_class(cls)])
        good = suff = 0
        for _ in range(int(p["draws"])):
            vec = gen_vector(cls, rng)
            good += satisfies(cls, vec)
            suff += check_expost_sufficiency(vec, menu)
        rank_ok = k == expected_rank(cls, len(menu))
        n = max(int(p["surplus_bidders"]), k)
        rep = sufficiency_surplus_check(cls, menu, k, n, int(p["surplus_trials"]), seed)
        ok = good == suff == int(p["draws"]) and rank_ok and rep.verdict
        failures += not ok
        row = {"class": cls.describe(), "menu": [list(b.members) for b in menu.bundles],
               "mode": menu.mode.value, "k": k, "draws": int(p["draws"]), "in_class": good,
               "sufficient": suff, "rank_ok": rank_ok, "surplus_check": rep.to_json(), "ok": ok}
        if cls.kind == "homogeneous":
            row["quadratic_rank_bound"] = homogeneous_rank_bound_holds(cls.n_items)
        rows.append(row)
    # several partitions at once: the union menu still suffices for each class
    families = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0,), (1, 2, 3))]
    union = union_menu([build_menu(PreferenceClass("partitioned_complements", 4, blocks=b))[0] for b in families])
    union_ok = True
    for b in families:
        cls = PreferenceClass("partitioned_complements", 4, blocks=b)
        rng = np.random.default_rng([seed, hash_class(cls), 1])
        union_ok &= all(check_expost_sufficiency(gen_vector(cls, rng), union) for _ in range(int(p["draws"])))
    summary = {"classes": len(rows), "failures": failures, "union_menu_ok": bool(union_ok),
               "union_menu_size": len(union)}
    return SuiteResult("sufficiency", seed, p, rows, summary, failures == 0 and union_ok)


def hash_class(cls: PreferenceClass) -> int:
    """Stable small integer for seeding per-class streams."""
    return zlib.crc32(json.dumps(cls.describe(), sort_keys=True).encode())


# --------------------------------------------------------------------------
# solver oracle


def _random_instance(rng, max_menu: int):
    n_items = int(rng.integers(1, 5))
    masks = list(range(1, 1 << n_items))
    size = int(rng.integers(1, min(max_menu, len(masks)) + 1))
    picked = sorted(int(m) for m in rng.choice(masks, size=size, replace=False))
    mode = FeasibilityMode.QUANTITY_CAP if rng.random() < 0.25 else FeasibilityMode.DISJOINT
    menu = Menu(tuple(Bundle.from_mask(m) for m in picked), n_items, mode)
    weights = (rng.integers(-4, 33, size=size) / 8.0).tolist()
    n = int(rng.integers(1, 5))
    vals = rng.integers(0, 17, size=(n, 1 << n_items)) / 16.0
    vals[:, 0] = 0.0
    return menu, weights, ValuationProfile(vals, 0.0, 1.0)


def suite_solver(seed: int = 0, params: dict | None = None) -> SuiteResult:
    p = _merge({"instances": 10_000, "max_menu": 12}, params)
    rng = np.random.default_rng([seed, 0x501])
    mismatches, rows, bad = 0, [], []
    for t in range(int(p["instances"])):
        menu, weights, vals = _random_instance(rng, int(p["max_menu"]))
        a, b = solve_wdp(menu, weights), brute_force_wdp(menu, weights)
        s1, s2 = efficient_surplus(vals, menu)[0], brute_force_surplus(vals, menu)
        ok = a.objective == b.objective and a.selection == b.selection and s1 == s2
        if not ok:
            mismatches += 1
            bad.append({"trial": t, "menu": [list(x.members) for x in menu.bundles], "mode": menu.mode.value,
                        "weights": weights, "valuations": vals.values.tolist()})
    rows.append({"instances": int(p["instances"]), "mismatches": mismatches})
    return SuiteResult("solver", seed, p, rows, {"instances": int(p["instances"]), "mismatches": mismatches},
                       mismatches == 0, bad)


# --------------------------------------------------------------------------
# determinism and replay


def tamper_price(lines: list[str], index: int) -> list[str]:
    out = list(lines)
    obj = json.loads(out[index])
    obj["prices"][0] += 1
    out[index] = json.dumps(obj, sort_keys=True)
    return out


def inject_illegal(lines: list[str], index: int) -> list[str]:
    """Replace an action with a bid on a bundle index outside the menu."""
    out = list(lines)
    size = len(json.loads(out[0])["config"]["menu"])
    obj = json.loads(out[index])
    obj["action"] = [[size, 1]]
    out[index] = json.dumps(obj, sort_keys=True)
    return out


def suite_determinism(seed: int = 0, params: dict | None = None) -> SuiteResult:
    p = _merge({"scenarios": 100}, params)
    rows, failures = [], 0
    for i in range(int(p["scenarios"])):
        s = seed * 1_000_003 + i
        first = list(transcript_lines(play(random_scenario(s))))
        second = list(transcript_lines(play(random_scenario(s))))
        identical = first == second
        verdict = replay(parse_transcript(first))
        row = {"seed": s, "identical": identical, "replay_ok": verdict.ok, "lines": len(first)}
        if len(first) > 2:
            edited = 1 + (len(first) - 2) // 2
            v2 = replay(parse_transcript(tamper_price(first, edited)))
            row["tamper_detected_at"] = v2.line
            row["tamper_ok"] = (not v2.ok) and v2.line == edited + 1
            v3 = replay(parse_transcript(inject_illegal(first, edited)))
            row["injection_reason"] = v3.reason
            row["injection_ok"] = (not v3.ok) and v3.line == edited + 1 and "unknown-bundle" in v3.reason
        ok = identical and verdict.ok and row.get("tamper_ok", True) and row.get("injection_ok", True)
        failures += not ok
        row["ok"] = ok
        rows.append(row)
    twice = [suite_fstar(seed, {"ks": [2], "ns": [10], "trials": 200}).dumps() for _ in range(2)]
    report_identical = twice[0] == twice[1]
    summary = {"scenarios": len(rows), "failures": failures, "report_identical": report_identical}
    return SuiteResult("determinism", seed, p, rows, summary, failures == 0 and report_identical)


# --------------------------------------------------------------------------
# exposure illustration (not an acceptance criterion)


def exposure_profile() -> tuple[Menu, ValuationProfile]:
    """Three items; bidder 0 wants only a, bidder 1 only b, bidder 2 only abc; all at 1.

    The specialists value any bundle holding their item at 1, except the grand
    bundle, which only bidder 2 wants.
    """
    v = np.zeros((3, 8))
    for mask in range(1, 7):
        v[0, mask] = 1.0 if mask & 1 else 0.0
        v[1, mask] = 1.0 if mask & 2 else 0.0
    v[2, 7] = 1.0
    menu = Menu((Bundle([0]), Bundle([1]), Bundle([0, 1, 2])), 3)
    return menu, ValuationProfile(v, 0.0, 1.0)


def _led_above_value(t: Transcript, menu: Menu, v: ValuationProfile, bidder: int, grid: PriceGrid) -> bool:
    """Whether ``bidder`` ever led some bundle at a price above its own value."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BidderCountWarning)
        state = new_auction(menu, grid, v.n_bidders)
    for rec in t.records:
        state = apply_action(state, rec.bidder, rec.action)
        for i, lead in enumerate(state.leaders):
            if lead == bidder and grid.price(state.prices[i]) > v.value(bidder, menu.masks[i]):
                return True
    return False


def suite_exposure(seed: int = 0, params: dict | None = None) -> SuiteResult:
    """Bidder 0 overbids on b; search scripted opponents for a loss.

    The adversary (bidder 1) opens with one bid at ``push`` on a and just below
    the spoiler's cap on b, then only re-bids leads and quits; bidder 2 bids
    straightforwardly on abc. ``push = 0`` means a straightforward bidder 1.
    """
    p = _merge({"epsilon": 0.05, "caps": [0.2, 0.4, 0.6], "pushes": [0.0, 0.3, 0.6, 0.9]}, params)
    menu, v = exposure_profile()
    grid = PriceGrid.covering(1.0, float(p["epsilon"]))
    rows = []
    for cap in p["caps"]:
        for push in p["pushes"]:
            if push > 0:
                b_price = grid.price(grid.below_tick(float(cap)) - 1)
                adversary = ScriptedBidder([[[0, float(push)], [1, b_price]]], after="quit")
            else:
                adversary = Straightforward()
            strategies = [SpoilerOverbidder(1, float(cap)), adversary, Straightforward()]
            t = play(Scenario(seed, menu, grid, v, strategies, 2))
            o = t.outcome
            won = [list(menu.bundles[i].members) for i, w in zip(o.selection, o.winners) if w == 0]
            rows.append({
                "cap": float(cap), "push": float(push), "bidder0_won": won,
                "bidder0_payment": o.payments[0], "bidder0_utility": o.utilities[0],
                "revenue": o.revenue, "led_above_value": _led_above_value(t, menu, v, 0, grid),
                "exposed": o.utilities[0] < 0,
            })
    summary = {
        "runs": len(rows),
        "led_above_value": sum(r["led_above_value"] for r in rows),
        "exposed_runs": sum(r["exposed"] for r in rows),
        "worst_utility": min(r["bidder0_utility"] for r in rows),
    }
    ok = summary["led_above_value"] > 0 and summary["exposed_runs"] > 0
    return SuiteResult("exposure", seed, p, rows, summary, ok)


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "theorem1": suite_revenue_bound,
    "robustness": suite_robustness,
    "fstar": suite_fstar,
    "theorem2": suite_distributional_bound,
    "vcg": suite_vcg,
    "sufficiency": suite_sufficiency,
    "solver": suite_solver,
    "determinism": suite_determinism,
    "exposure": suite_exposure,
}


def run_suite(name: str, seed: int = 0, params: dict | None = None) -> SuiteResult:
    try:
        fn = SUITES[name]
    except KeyError:
        raise ParameterError(f"unknown suite {name!r}; choose from {', '.join(sorted(SUITES))}") from None
    return fn(seed, params)
