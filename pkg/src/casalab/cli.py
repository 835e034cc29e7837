"""Command-line entry point: run, verify, replay, wdp, guarantee.

Exit codes: 0 when every verdict holds, 1 on a violation or replay mismatch,
2 on configuration, schema or usage errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__
from .core import (
    Bundle,
    CasaError,
    FeasibilityMode,
    Menu,
    ParameterError,
    ValuationProfile,
    kth_highest_per_bundle,
)
from .engine import BidderCountWarning, PriceGrid, run
from .guarantees import rank_guarantee, revenue_bound
from .mechanisms import vcg
from .menus import PreferenceClass, build_menu, gen_valuation, quantity_menu
from .strategies import CoalitionSpec, coalition_wrapper, make_strategy
from .suites import SUITES, run_suite
from .transcript import TranscriptParseError, read_transcript, replay, write_transcript
from .wdp import SOLVER_CAP, solve_wdp

SCHEMA_VERSION = 1
OUT_ENV = "CASALAB_OUT"
DEFAULT_OUT = "casalab-out"

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2

# the suite parameter that --trials overrides
TRIALS_PARAM = {
    "theorem1": "scenarios",
    "robustness": "scenarios",
    "fstar": "trials",
    "theorem2": "trials",
    "vcg": "instances",
    "sufficiency": "draws",
    "solver": "instances",
    "determinism": "scenarios",
    "exposure": None,
}

_bundle = {"type": "array", "items": {"type": ["integer", "string"]}, "minItems": 1}

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["schema_version", "items", "menu", "grid", "bidders"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "items": {
            "oneOf": [
                {"type": "integer", "minimum": 1},
                {"type": "array", "items": {"type": "string"}, "minItems": 1, "uniqueItems": True},
            ]
        },
        "menu": {
            "oneOf": [
                {"type": "array", "items": _bundle, "minItems": 1},
                {
                    "type": "object",
                    "required": ["builder"],
                    "additionalProperties": False,
                    "properties": {
                        "builder": {"enum": ["singletons", "grand", "complete", "quantity", "class"]},
                        "class": {"type": "object"},
                    },
                },
            ]
        },
        "mode": {"enum": [m.value for m in FeasibilityMode]},
        "grid": {
            "type": "object",
            "required": ["epsilon"],
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "max_price": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "value_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "bidders": {
            "type": "object",
            "required": ["count"],
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "valuations": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "prefixItems": [_bundle, {"type": "number"}],
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    },
                },
                "class": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"type": "string"},
                        "blocks": {"type": "array", "items": _bundle},
                        "theta_lo": {"type": "number"},
                        "rho_lo": {"type": "number"},
                    },
                    "additionalProperties": False,
                },
            },
        },
        "strategies": {
            "oneOf": [
                {"$ref": "#/$defs/strategy"},
                {"type": "array", "items": {"$ref": "#/$defs/strategy"}, "minItems": 1},
            ]
        },
        "coalitions": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}, "minItems": 1}},
        "nonstrategic": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "experiment": {"enum": ["casa"]},
        "compare_vcg": {"type": "boolean"},
    },
    "$defs": {
        "strategy": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
        }
    },
}


class ConfigError(CasaError):
    """Invalid scenario configuration; the message names the offending field."""


def _field(path: Sequence[Any]) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


@dataclass
class ScenarioConfig:
    name: str
    menu: Menu
    grid: PriceGrid
    n_bidders: int
    v_lo: float
    v_hi: float
    valuations: ValuationProfile | None
    pref_class: PreferenceClass | None
    strategy_specs: list[dict]
    coalitions: CoalitionSpec | None
    nonstrategic: tuple[int, ...]
    seeds: tuple[int, ...]
    compare_vcg: bool

    def valuations_for(self, seed: int) -> ValuationProfile:
        if self.valuations is not None:
            return self.valuations
        return gen_valuation(self.pref_class, self.n_bidders, seed)

    def strategies_for(self, vals: ValuationProfile) -> list:
        if self.coalitions is not None:
            base = self.strategy_specs[0]
            singles = coalition_wrapper(self.coalitions, vals, lambda: make_strategy(base["name"], base.get("params")))
            return singles
        return [make_strategy(s["name"], s.get("params")) for s in self.strategy_specs]

    @property
    def k_effective(self) -> int:
        if self.coalitions is not None:
            return self.coalitions.effective_rank(len(self.menu))
        return len(self.menu) + 1 + len(self.nonstrategic)


def _items(raw) -> tuple[int, dict[str, int]]:
    if isinstance(raw, int):
        return raw, {}
    return len(raw), {name: i for i, name in enumerate(raw)}


def _resolve_bundle(raw, n_items: int, names: dict[str, int], where: str) -> Bundle:
    out = []
    for j, x in enumerate(raw):
        if isinstance(x, str):
            if x not in names:
                raise ConfigError(f"{where}[{j}]: unknown item name {x!r}")
            out.append(names[x])
        else:
            if not 0 <= x < n_items:
                raise ConfigError(f"{where}[{j}]: item {x} outside 0..{n_items - 1}")
            out.append(x)
    if len(set(out)) != len(out):
        raise ConfigError(f"{where}: repeated item")
    return Bundle(out)


def _pref_class(raw: dict, n_items: int, names, where: str) -> PreferenceClass:
    kw = dict(raw)
    kind = kw.pop("kind")
    if "blocks" in kw:
        kw["blocks"] = tuple(
            tuple(sorted(_resolve_bundle(b, n_items, names, f"{where}.blocks[{i}]")))
            for i, b in enumerate(kw["blocks"])
        )
    try:
        return PreferenceClass(kind, n_items, **kw)
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(obj: Any) -> ScenarioConfig:
    """Validate a decoded config against the schema, then resolve references."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(obj), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = min(errors, key=lambda e: -len(e.absolute_path))
        raise ConfigError(f"{_field(err.absolute_path)}: {err.message}")
    n_items, names = _items(obj["items"])
    mode = FeasibilityMode(obj.get("mode", "disjoint"))
    raw_menu = obj["menu"]
    pref = None
    if "class" in obj["bidders"]:
        pref = _pref_class(obj["bidders"]["class"], n_items, names, "bidders.class")
    if isinstance(raw_menu, list):
        bundles = tuple(_resolve_bundle(b, n_items, names, f"menu[{i}]") for i, b in enumerate(raw_menu))
        if len(set(bundles)) != len(bundles):
            raise ConfigError("menu: duplicate bundle")
        menu = Menu(bundles, n_items, mode)
    else:
        builder = raw_menu["builder"]
        if builder == "singletons":
            menu = Menu.singletons(n_items)
        elif builder == "grand":
            menu = Menu.grand(n_items)
        elif builder == "complete":
            menu = Menu.complete(n_items, mode)
        elif builder == "quantity":
            menu = quantity_menu(n_items)
        else:
            cls = pref
            if "class" in raw_menu:
                cls = _pref_class(raw_menu["class"], n_items, names, "menu.class")
            if cls is None:
                raise ConfigError("menu.class: the class builder needs a preference class")
            menu = build_menu(cls)[0]
    lo, hi = obj.get("value_range", [0.0, 1.0])
    if not 0 <= lo <= hi:
        raise ConfigError("value_range: need 0 <= low <= high")
    grid_raw = obj["grid"]
    eps = float(grid_raw["epsilon"])
    grid = PriceGrid(eps, float(grid_raw["max_price"])) if "max_price" in grid_raw else PriceGrid.covering(hi, eps)
    try:
        grid.check_covers(hi)
    except ParameterError as exc:
        raise ConfigError(f"grid.max_price: {exc}") from None
    bidders = obj["bidders"]
    n = int(bidders["count"])
    vals = None
    if "valuations" in bidders:
        tables = bidders["valuations"]
        if len(tables) != n:
            raise ConfigError(f"bidders.valuations: {len(tables)} tables for {n} bidders")
        dense = np.full((n, 1 << n_items), float(lo))
        dense[:, 0] = 0.0
        for b_i, table in enumerate(tables):
            for e_i, (bundle, value) in enumerate(table):
                where = f"bidders.valuations[{b_i}][{e_i}]"
                dense[b_i, _resolve_bundle(bundle, n_items, names, where).mask] = value
                if not lo <= value <= hi:
                    raise ConfigError(f"{where}: value {value} outside value_range")
        vals = ValuationProfile(dense, float(lo), float(hi))
    elif pref is None:
        raise ConfigError("bidders: give either valuations or a class")
    strat = obj.get("strategies", {"name": "straightforward"})
    specs = [strat] * n if isinstance(strat, dict) else list(strat)
    coalitions = None
    if "coalitions" in obj:
        coalitions = CoalitionSpec(tuple(tuple(c) for c in obj["coalitions"]))
        try:
            coalitions.validate(n)
        except ParameterError as exc:
            raise ConfigError(f"coalitions: {exc}") from None
    elif len(specs) != n:
        raise ConfigError(f"strategies: {len(specs)} strategies for {n} bidders")
    for i, s in enumerate(specs):
        try:
            make_strategy(s["name"], s.get("params"))
        except (ParameterError, TypeError) as exc:
            raise ConfigError(f"strategies[{i}]: {exc}") from None
    listed = set(obj.get("nonstrategic", ()))
    if any(i >= n for i in listed):
        raise ConfigError("nonstrategic: bidder index out of range")
    if coalitions is None:
        listed |= {i for i, s in enumerate(specs) if s["name"] == "non_strategic"}
    nonstrat = tuple(sorted(listed))
    return ScenarioConfig(
        name=obj.get("name", "scenario"),
        menu=menu,
        grid=grid,
        n_bidders=n,
        v_lo=float(lo),
        v_hi=float(hi),
        valuations=vals,
        pref_class=pref,
        strategy_specs=specs,
        coalitions=coalitions,
        nonstrategic=nonstrat,
        seeds=tuple(obj.get("seeds", [0])),
        compare_vcg=bool(obj.get("compare_vcg", True)),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return parse_config(obj)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# --------------------------------------------------------------------------
# commands


def _out_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _comparison(cfg: ScenarioConfig, vals: ValuationProfile) -> dict:
    ranks = {str(k): rank_guarantee(vals, cfg.menu, k) for k in range(1, vals.n_bidders + 1)}
    out: dict[str, Any] = {"rank_guarantees": ranks}
    if cfg.compare_vcg and len(cfg.menu) <= SOLVER_CAP:
        res = vcg(vals, cfg.menu)
        out["vcg"] = {"revenue": res.revenue, "payments": list(res.payments), "surplus": res.surplus}
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out_dir) / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    seeds = (args.seed,) if args.seed is not None else cfg.seeds
    runs, all_ok = [], True
    for seed in seeds:
        vals = cfg.valuations_for(seed)
        strategies = cfg.strategies_for(vals)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BidderCountWarning)
            t = run(cfg.menu, cfg.grid, strategies, vals, seed=seed)
        path = write_transcript(t, out / f"transcript-seed{seed}.jsonl")
        verdict = revenue_bound(t.outcome.revenue, vals, cfg.menu, cfg.grid.epsilon, cfg.k_effective)
        all_ok &= verdict.ok
        runs.append({
            "seed": seed,
            "transcript": path.name,
            "stages": len(t.records),
            "outcome": t.outcome.to_json(),
            "bound_check": verdict.to_json(),
            "comparison": _comparison(cfg, vals),
        })
    runs.sort(key=lambda r: r["seed"])
    summary = {
        "environment": {"package": "casalab", "version": __version__},
        "scenario": cfg.name,
        "k_effective": cfg.k_effective,
        "runs": runs,
        "ok": all_ok,
    }
    (out / "outcome.json").write_text(_dump(summary), encoding="utf-8")
    print(json.dumps({"scenario": cfg.name, "runs": len(runs), "ok": all_ok, "out": str(out)}, sort_keys=True))
    return EXIT_OK if all_ok else EXIT_VIOLATION


def _parse_params(items: Sequence[str]) -> dict:
    params = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def cmd_verify(args) -> int:
    name = args.suite
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(sorted(SUITES))}")
    params = _parse_params(args.param)
    if args.trials is not None:
        key = TRIALS_PARAM.get(name)
        if key is None:
            raise ConfigError(f"suite {name!r} takes no trial count")
        params[key] = args.trials
    seed = 0 if args.seed is None else args.seed
    try:
        result = run_suite(name, seed, params)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(args.out_dir)
    report = out / f"{name}-seed{seed}.json"
    report.write_text(result.dumps(), encoding="utf-8")
    for i, ce in enumerate(result.counterexamples):
        cdir = out / f"{name}-seed{seed}-counterexamples"
        cdir.mkdir(exist_ok=True)
        if "transcript" in ce:
            (cdir / f"case{i}.jsonl").write_text("\n".join(ce["transcript"]) + "\n", encoding="utf-8")
        else:
            (cdir / f"case{i}.json").write_text(_dump(ce), encoding="utf-8")
    print(json.dumps({"suite": name, "ok": result.ok, "report": str(report), "summary": result.summary},
                     sort_keys=True))
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_replay(args) -> int:
    try:
        parsed = read_transcript(args.transcript)
    except TranscriptParseError as exc:
        print(json.dumps({"ok": False, "error": "parse", "line": exc.line, "message": str(exc)}, sort_keys=True))
        return EXIT_CONFIG
    except OSError as exc:
        raise ConfigError(f"{args.transcript}: {exc.strerror}") from None
    try:
        verdict = replay(parsed)
    except (CasaError, KeyError, ValueError) as exc:
        print(json.dumps({"ok": False, "error": "header", "line": 1, "message": str(exc)}, sort_keys=True))
        return EXIT_CONFIG
    print(json.dumps({"ok": verdict.ok, "line": verdict.line, "reason": verdict.reason or "ok"}, sort_keys=True))
    return EXIT_OK if verdict.ok else EXIT_VIOLATION


def _inline_or_config(args) -> tuple[Menu, ValuationProfile | None]:
    if args.config:
        cfg = load_config(args.config)
        seed = 0 if args.seed is None else args.seed
        return cfg.menu, cfg.valuations_for(seed)
    if args.menu is None or args.items is None:
        raise ConfigError("give --config or both --items and --menu")
    try:
        raw = json.loads(args.menu)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--menu: {exc.msg}") from None
    if not isinstance(raw, list) or not raw:
        raise ConfigError("--menu: expected a non-empty JSON list of bundles")
    bundles = tuple(_resolve_bundle(b, args.items, {}, f"menu[{i}]") for i, b in enumerate(raw))
    return Menu(bundles, args.items, FeasibilityMode(args.mode)), None


def cmd_wdp(args) -> int:
    menu, vals = _inline_or_config(args)
    if args.weights is not None:
        try:
            weights = json.loads(args.weights)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--weights: {exc.msg}") from None
        if not isinstance(weights, list):
            raise ConfigError("--weights: expected a JSON list")
    elif vals is not None:
        k = args.k or 1
        weights = kth_highest_per_bundle(vals.on_menu(menu), k).tolist()
    else:
        raise ConfigError("--weights required without a config")
    if len(weights) != len(menu):
        raise ConfigError(f"--weights: expected {len(menu)} weights, got {len(weights)}")
    res = solve_wdp(menu, [float(w) for w in weights])
    print(json.dumps({
        "selection": list(res.selection),
        "bundles": [list(menu.bundles[i].members) for i in res.selection],
        "objective": res.objective,
    }, sort_keys=True))
    return EXIT_OK


def cmd_guarantee(args) -> int:
    menu, vals = _inline_or_config(args)
    if vals is None:
        raise ConfigError("guarantee needs a config with valuations")
    k = args.k if args.k is not None else len(menu) + 1
    if not 1 <= k <= vals.n_bidders:
        raise ConfigError(f"--k: {k} outside 1..{vals.n_bidders}")
    print(json.dumps({"k": k, "guarantee": rank_guarantee(vals, menu, k)}, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="casalab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"casalab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="play configured auctions and write transcripts")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a named acceptance suite")
    v.add_argument("--suite", required=True, help=", ".join(sorted(SUITES)))
    v.add_argument("--seed", type=int)
    v.add_argument("--trials", type=int)
    v.add_argument("--param", action="append", metavar="KEY=VALUE")
    v.add_argument("--out-dir")
    v.set_defaults(func=cmd_verify)

    rp = sub.add_parser("replay", help="re-validate a transcript")
    rp.add_argument("transcript")
    rp.set_defaults(func=cmd_replay)

    for name, func, helptext in (("wdp", cmd_wdp, "solve one winner-determination problem"),
                                 ("guarantee", cmd_guarantee, "compute one k-th rank guarantee")):
        w = sub.add_parser(name, help=helptext)
        w.add_argument("--config")
        w.add_argument("--seed", type=int)
        w.add_argument("--items", type=int)
        w.add_argument("--menu", help="JSON list of bundles")
        w.add_argument("--mode", default="disjoint", choices=[m.value for m in FeasibilityMode])
        w.add_argument("--k", type=int)
        if name == "wdp":
            w.add_argument("--weights", help="JSON list, one weight per menu bundle")
        w.set_defaults(func=func)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(json.dumps({"ok": False, "error": "config", "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
