"""Line-delimited transcript format and bit-exact replay.

Layout: one JSON object per line. The first line is the header (``"kind":
"header"`` plus the config snapshot), then one ``"action"`` line per stage, then
a ``"outcome"`` footer.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .core import FeasibilityMode, Menu, ValuationProfile
from .engine import (
    BidderCountWarning,
    PriceGrid,
    Outcome,
    Record,
    Transcript,
    action_from_json,
    apply_action,
    is_terminated,
    new_auction,
    next_mover,
    observe,
    settle,
    validate_action,
)

FORMAT_VERSION = 1


class TranscriptParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def transcript_lines(t: Transcript) -> Iterable[str]:
    yield json.dumps({"kind": "header", "version": FORMAT_VERSION, "config": t.config}, sort_keys=True)
    for r in t.records:
        yield json.dumps(
            {
                "kind": "action",
                "stage": r.stage,
                "bidder": r.bidder,
                "obs": r.digest,
                "action": r.action.to_json(),
                "prices": list(r.prices),
            },
            sort_keys=True,
        )
    yield json.dumps(
        {"kind": "outcome", "outcome": None if t.outcome is None else t.outcome.to_json()},
        sort_keys=True,
    )


def dump_transcript(t: Transcript, fp: IO[str]) -> None:
    for line in transcript_lines(t):
        fp.write(line + "\n")


def write_transcript(t: Transcript, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fp:
        dump_transcript(t, fp)
    return path


@dataclass
class ParsedTranscript:
    config: dict
    records: list[tuple[int, Record]]  # (line number, record)
    outcome: dict | None
    outcome_line: int


def parse_transcript(lines: Iterable[str]) -> ParsedTranscript:
    header = None
    records: list[tuple[int, Record]] = []
    outcome, outcome_line = None, -1
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TranscriptParseError(lineno, f"invalid JSON ({exc.msg})") from None
        kind = obj.get("kind") if isinstance(obj, dict) else None
        if header is None:
            if kind != "header":
                raise TranscriptParseError(lineno, "first record must be the header")
            if obj.get("version") != FORMAT_VERSION:
                raise TranscriptParseError(lineno, f"unsupported version {obj.get('version')!r}")
            header = obj["config"]
        elif kind == "action":
            if outcome_line > 0:
                raise TranscriptParseError(lineno, "action after outcome footer")
            try:
                rec = Record(
                    int(obj["stage"]),
                    int(obj["bidder"]),
                    str(obj["obs"]),
                    action_from_json(obj["action"]),
                    tuple(int(x) for x in obj["prices"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise TranscriptParseError(lineno, f"malformed action record ({exc})") from None
            records.append((lineno, rec))
        elif kind == "outcome":
            outcome, outcome_line = obj.get("outcome"), lineno
        else:
            raise TranscriptParseError(lineno, f"unknown record kind {kind!r}")
    if header is None:
        raise TranscriptParseError(1, "empty transcript")
    if outcome_line < 0:
        raise TranscriptParseError(lineno + 1, "missing outcome footer")
    return ParsedTranscript(header, records, outcome, outcome_line)


def read_transcript(path: str | Path) -> ParsedTranscript:
    with Path(path).open(encoding="utf-8") as fp:
        return parse_transcript(fp)


def scenario_from_config(config: dict) -> tuple[Menu, PriceGrid, ValuationProfile]:
    menu = Menu(tuple(config["menu"]), config["n_items"], FeasibilityMode(config["mode"]))
    grid = PriceGrid(config["epsilon"], config["max_price"])
    vals = ValuationProfile(config["valuations"], config["v_lo"], config["v_hi"])
    return menu, grid, vals


@dataclass(frozen=True)
class ReplayVerdict:
    ok: bool
    line: int | None = None
    reason: str = ""
    outcome: Outcome | None = None

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return f"line {self.line}: {self.reason}"


def replay(parsed: ParsedTranscript) -> ReplayVerdict:
    """Re-validate every action and recompute the outcome."""
    menu, grid, vals = scenario_from_config(parsed.config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BidderCountWarning)
        state = new_auction(menu, grid, vals.n_bidders)
    observe_active = bool(parsed.config.get("observe_active", False))
    for lineno, rec in parsed.records:
        mover = next_mover(state)
        if mover is None:
            return ReplayVerdict(False, lineno, "action recorded after termination")
        if rec.bidder != mover or rec.stage != state.stage + 1:
            return ReplayVerdict(
                False, lineno, f"expected bidder {mover} at stage {state.stage + 1}"
            )
        obs = observe(state, mover, menu, grid, vals, observe_active)
        if obs.digest() != rec.digest:
            return ReplayVerdict(False, lineno, "observation digest mismatch")
        violation = validate_action(state, mover, rec.action, grid)
        if violation is not None:
            return ReplayVerdict(False, lineno, f"validation failure, {violation}")
        state = apply_action(state, mover, rec.action)
        if state.prices != rec.prices:
            return ReplayVerdict(False, lineno, "post-action prices mismatch")
    if not is_terminated(state):
        return ReplayVerdict(False, parsed.outcome_line, "auction not terminated at footer")
    outcome = settle(state, menu, grid, vals)
    if parsed.outcome is None or Outcome.from_json(parsed.outcome) != outcome:
        return ReplayVerdict(False, parsed.outcome_line, "outcome mismatch", outcome)
    return ReplayVerdict(True, None, "", outcome)


def replay_transcript(t: Transcript) -> ReplayVerdict:
    return replay(parse_transcript(transcript_lines(t)))
