"""Pass@1 evaluation on a 900-puzzle theme/level test protocol.

Completions are persisted to ``items.jsonl`` before anything is scored, so a
run can be rescored offline (for example with a different ``eta``) without
new model calls.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import httpx

from .prompts import build_solver_prompt
from .reward import RewardConfig, score
from .sampler import SeededDraw
from .teacher import TeacherConfig, TeacherError, complete

log = logging.getLogger(__name__)

THEME_SPLIT_THEMES = (
    "advancedPawn", "attraction", "backRankMate", "capturingDefender", "defensiveMove",
    "deflection", "discoveredAttack", "doubleCheck", "fork", "hangingPiece",
    "mateIn1", "mateIn2", "pin", "promotion", "queensideAttack",
    "sacrifice", "skewer", "trappedPiece", "xRayAttack", "zugzwang",
)
LEVELS = ("Beginner", "Intermediate", "Advanced", "Expert")
PER_THEME = 25
PER_LEVEL = 100
ABORT_ERROR_FRACTION = 0.20
EVAL_MAX_ATTEMPTS = 3
AVG_ACC_FORMULA = "Avg Acc = 100 * (sum of item rewards) / (number of items), over both splits"


class EvalError(RuntimeError):
    code = "EvalError"


class InsufficientCell(EvalError):
    code = "InsufficientCell"

    def __init__(self, label: str, available: int, needed: int):
        super().__init__(f"cell {label!r}: {available} eligible puzzles, need {needed}")
        self.label = label


class AbortedRun(EvalError):
    code = "AbortedRun"


@dataclass(frozen=True)
class LevelBands:
    """Half-open rating bands: Beginner < b1 <= Intermediate < b2 <= Advanced < b3 <= Expert."""

    intermediate_from: int = 1100
    advanced_from: int = 1700
    expert_from: int = 2300

    def __post_init__(self):
        if not self.intermediate_from < self.advanced_from < self.expert_from:
            raise ValueError("level cutoffs must be strictly increasing")

    def level(self, rating: int) -> str:
        if rating < self.intermediate_from:
            return "Beginner"
        if rating < self.advanced_from:
            return "Intermediate"
        if rating < self.expert_from:
            return "Advanced"
        return "Expert"


@dataclass(frozen=True)
class EvalSplit:
    kind: str
    cells: dict

    @property
    def ids(self) -> list:
        return [p.id for cell in self.cells.values() for p in cell]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cells": {label: [p.id for p in ps] for label, ps in self.cells.items()}}


def _draw_cell(label, candidates, n, draw, taken) -> list:
    pool = [p for p in candidates if p.id not in taken]
    if len(pool) < n:
        raise InsufficientCell(label, len(pool), n)
    picked = draw.sample(pool, n)
    taken.update(p.id for p in picked)
    return picked


def build_test_splits(
    puzzles: Iterable,
    train_ids=frozenset(),
    seed: int = 0,
    bands: LevelBands = LevelBands(),
    themes=THEME_SPLIT_THEMES,
    per_theme: int = PER_THEME,
    per_level: int = PER_LEVEL,
) -> tuple:
    """Seeded theme and level splits, unique ids, disjoint from ``train_ids``.

    Cells are filled in order (themes as listed, then levels), each drawing
    without replacement from puzzles not used by an earlier cell.
    """
    seen = set(train_ids)
    pool = []
    for p in puzzles:
        if p.id not in seen:
            seen.add(p.id)
            pool.append(p)
    draw = SeededDraw(seed)
    taken: set = set()
    theme_cells = {}
    for theme in themes:
        theme_cells[theme] = _draw_cell(theme, [p for p in pool if theme in p.themes], per_theme, draw, taken)
    level_cells = {}
    for level in LEVELS:
        level_cells[level] = _draw_cell(level, [p for p in pool if bands.level(p.rating) == level], per_level, draw, taken)
    return EvalSplit("theme", theme_cells), EvalSplit("level", level_cells)


@dataclass
class ItemRecord:
    puzzle_id: str
    split: str
    cell: str
    expected: str
    completion: Optional[str]
    tokens: Optional[int]
    latency: Optional[float]
    error: Optional[str] = None
    predicted: Optional[str] = None
    reward: float = 0.0
    reason: Optional[str] = None

    RAW_FIELDS = ("puzzle_id", "split", "cell", "expected", "completion", "tokens", "latency", "error")

    def raw_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.RAW_FIELDS}

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ItemRecord":
        return cls(**{k: data[k] for k in cls.RAW_FIELDS})


def _mean(values) -> Optional[float]:
    values = list(values)
    return sum(values) / len(values) if values else None


@dataclass
class EvalReport:
    model: str
    items: list
    eta: float = 0.0
    cells: dict = field(init=False)

    def __post_init__(self):
        groups: dict = {}
        for it in self.items:
            groups.setdefault((it.split, it.cell), []).append(it.reward)
        self.cells = {key: 100.0 * _mean(rs) for key, rs in groups.items()}

    def accuracy(self, split: str, cell: str) -> Optional[float]:
        return self.cells.get((split, cell))

    @property
    def theme_split(self) -> Optional[float]:
        rs = [it.reward for it in self.items if it.split == "theme"]
        return 100.0 * _mean(rs) if rs else None

    @property
    def avg_accuracy(self) -> Optional[float]:
        return 100.0 * _mean(it.reward for it in self.items) if self.items else None

    @property
    def avg_tokens(self) -> Optional[float]:
        return _mean(it.tokens for it in self.items if it.tokens is not None)

    @property
    def n_errors(self) -> int:
        return sum(1 for it in self.items if it.error)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "eta": self.eta,
            "n_items": len(self.items),
            "n_errors": self.n_errors,
            "difficulty": {
                **{lvl: self.accuracy("level", lvl) for lvl in LEVELS},
                "Theme-Split": self.theme_split,
                "Avg Acc": self.avg_accuracy,
                "Avg Tokens": self.avg_tokens,
            },
            "themes": {t: self.accuracy("theme", t) for t in _theme_labels(self.items)},
            "formula": AVG_ACC_FORMULA,
        }


def _theme_labels(items) -> list:
    present = {it.cell for it in items if it.split == "theme"}
    ordered = [t for t in THEME_SPLIT_THEMES if t in present]
    return ordered + sorted(present - set(ordered))


def score_items(items: list, cfg: RewardConfig = RewardConfig()) -> list:
    """Fill ``predicted``, ``reward`` and ``reason``; failed requests score 0."""
    out = []
    for raw in items:
        it = ItemRecord.from_dict(raw.raw_dict() if isinstance(raw, ItemRecord) else raw)
        if it.error or it.completion is None:
            it.reward, it.reason = 0.0, "request_failed"
        else:
            outcome = score(it.completion, it.expected, cfg)
            it.predicted, it.reward, it.reason = outcome.predicted, outcome.reward, outcome.reason
        out.append(it)
    return out


def _query_all(cfg: TeacherConfig, jobs: list, client: Optional[httpx.Client], sleep) -> list:
    def one(job):
        split, cell, puzzle = job
        prompt = build_solver_prompt(puzzle)
        t0 = time.monotonic()
        try:
            c = complete(cfg, prompt, client=client, temperature=0.0, sleep=sleep)
        except TeacherError as exc:
            return ItemRecord(puzzle.id, split, cell, puzzle.solution.uci(), None, None, time.monotonic() - t0, exc.code)
        return ItemRecord(puzzle.id, split, cell, puzzle.solution.uci(), c.text, c.completion_tokens, time.monotonic() - t0)

    own = client is None
    if own:
        client = httpx.Client(timeout=cfg.request_timeout, limits=httpx.Limits(max_connections=cfg.max_concurrency))
    try:
        with ThreadPoolExecutor(max_workers=cfg.max_concurrency) as pool:
            return list(pool.map(one, jobs))
    finally:
        if own:
            client.close()


def evaluate(
    cfg: TeacherConfig,
    splits: Iterable[EvalSplit],
    reward_cfg: RewardConfig = RewardConfig(),
    out_dir=None,
    client: Optional[httpx.Client] = None,
    sleep=time.sleep,
) -> EvalReport:
    """Query the model once per puzzle at temperature 0 and score the answers."""
    cfg.api_key()
    cfg = dataclasses.replace(
        cfg, temperature=0.0,
        retry=dataclasses.replace(cfg.retry, max_attempts=min(cfg.retry.max_attempts, EVAL_MAX_ATTEMPTS)),
    )
    jobs = [(s.kind, label, p) for s in splits for label, ps in s.cells.items() for p in ps]
    raw = _query_all(cfg, jobs, client, sleep)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_items(raw, out / "items.jsonl")
    errors = sum(1 for it in raw if it.error)
    if raw and errors / len(raw) > ABORT_ERROR_FRACTION:
        raise AbortedRun(f"{errors} of {len(raw)} requests failed")
    report = EvalReport(cfg.model_name, score_items(raw, reward_cfg), reward_cfg.eta)
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_items(items: list, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for it in items:
            fh.write(json.dumps(it.raw_dict(), ensure_ascii=False) + "\n")


def read_items(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [ItemRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def rescore(items_path, reward_cfg: RewardConfig = RewardConfig(), model: str = "") -> EvalReport:
    """Rebuild a report from persisted completions, no model calls."""
    return EvalReport(model, score_items(read_items(items_path), reward_cfg), reward_cfg.eta)


def _pct(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.1f}"


def _pct_theme(value: Optional[float]) -> str:
    if value is None:
        return "-"
    return f"{value:.0f}" if abs(value - round(value)) < 1e-9 else f"{value:.1f}"


def _tokens(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:,.0f}"


def _table(header: list, row: list) -> str:
    widths = [max(len(h), len(c)) for h, c in zip(header, row)]
    lines = [
        "  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths))),
        "  ".join("-" * w for w in widths),
        "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))),
    ]
    return "\n".join(line.rstrip() for line in lines)


def render_report(report: EvalReport) -> str:
    """Difficulty table, per-theme table and a footer with the aggregation rule."""
    name = report.model or "model"
    diff_header = ["Model", *LEVELS, "Theme-Split", "Avg Acc", "Avg Tokens"]
    diff_row = [
        name,
        *(_pct(report.accuracy("level", lvl)) for lvl in LEVELS),
        _pct(report.theme_split),
        _pct(report.avg_accuracy),
        _tokens(report.avg_tokens),
    ]
    themes = _theme_labels(report.items)
    theme_header = ["Model", *themes]
    theme_row = [name, *(_pct_theme(report.accuracy("theme", t)) for t in themes)]
    footer = [
        f"Items: {len(report.items)}  Errors: {report.n_errors}  eta: {report.eta:g}",
        AVG_ACC_FORMULA,
        "Avg Tokens = mean provider-reported completion tokens ('-' when no usage was reported)",
    ]
    return "\n\n".join((
        "Accuracy by difficulty (%)\n" + _table(diff_header, diff_row),
        "Accuracy by theme (%)\n" + _table(theme_header, theme_row),
        "\n".join(footer),
    )) + "\n"


def write_report(report: EvalReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(render_report(report), encoding="utf-8")
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    with open(out / "items.scored.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for it in report.items:
            fh.write(json.dumps(it.to_dict(), ensure_ascii=False) + "\n")
