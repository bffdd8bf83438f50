"""Lichess puzzle ingestion, normalisation, statistics and SFT/RLVR emission."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .chess import FenError, IllegalMove, InvalidMoveText, Move, Position, apply_move, format_fen, parse_fen

log = logging.getLogger(__name__)

LICHESS_HEADER = (
    "PuzzleId", "FEN", "Moves", "Rating", "RatingDeviation",
    "Popularity", "NbPlays", "Themes", "GameUrl", "OpeningTags",
)
SFT_FIELDS = ("puzzle_id", "prompt", "response", "teacher_model", "themes", "rating")
RLVR_FIELDS = ("puzzle_id", "prompt", "ground_truth", "themes", "rating")


class DatasetError(ValueError):
    code = "DatasetError"

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(f"{self.code}: {prefix}{message}")


class HeaderMismatch(DatasetError):
    code = "HeaderMismatch"


class MalformedRow(DatasetError):
    code = "MalformedRow"


class IllegalSetupMove(DatasetError):
    code = "IllegalSetupMove"


class IllegalSolution(DatasetError):
    code = "IllegalSolution"


class IoFailure(DatasetError):
    code = "IoFailure"


@dataclass(frozen=True)
class Puzzle:
    """A puzzle posed after the opponent's setup move."""

    id: str
    pre_position: Position
    setup_move: Move
    position: Position
    solution: Move
    continuation: tuple
    rating: int
    themes: frozenset
    source_url: str = ""

    @property
    def fen(self) -> str:
        return format_fen(self.position)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "fen": format_fen(self.pre_position),
            "moves": " ".join(m.uci() for m in (self.setup_move, self.solution, *self.continuation)),
            "rating": self.rating,
            "themes": sorted(self.themes),
            "source_url": self.source_url,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Puzzle":
        return make_puzzle(data["id"], data["fen"], data["moves"], data["rating"], data["themes"], data.get("source_url", ""))


@dataclass(frozen=True)
class RowRejection:
    row: int
    puzzle_id: str
    code: str
    detail: str

    def to_dict(self) -> dict:
        return {"row": self.row, "puzzle_id": self.puzzle_id, "code": self.code, "detail": self.detail}


def make_puzzle(puzzle_id, fen, moves, rating, themes, source_url="", row=None) -> Puzzle:
    """Build a :class:`Puzzle` from Lichess-style fields.

    ``moves`` holds the setup move followed by the solution line.
    """
    try:
        pre = parse_fen(fen)
    except FenError as exc:
        raise MalformedRow(f"bad FEN: {exc}", row) from None
    tokens = moves.split() if isinstance(moves, str) else list(moves)
    if len(tokens) < 2:
        raise MalformedRow(f"need setup move and solution, got {len(tokens)} moves", row)
    try:
        parsed = [Move.from_uci(t) for t in tokens]
    except InvalidMoveText as exc:
        raise MalformedRow(str(exc), row) from None
    try:
        rating = int(rating)
    except (TypeError, ValueError):
        raise MalformedRow(f"bad rating {rating!r}", row) from None
    if rating <= 0:
        raise MalformedRow(f"rating must be positive, got {rating}", row)
    setup, solution, *rest = parsed
    try:
        position = apply_move(pre, setup)
    except IllegalMove as exc:
        raise IllegalSetupMove(str(exc), row) from None
    try:
        cursor = apply_move(position, solution)
        for move in rest:
            cursor = apply_move(cursor, move)
    except IllegalMove as exc:
        raise IllegalSolution(str(exc), row) from None
    if isinstance(themes, str):
        themes = themes.split()
    return Puzzle(
        id=str(puzzle_id),
        pre_position=pre,
        setup_move=setup,
        position=position,
        solution=solution,
        continuation=tuple(rest),
        rating=rating,
        themes=frozenset(themes),
        source_url=source_url or "",
    )


def ingest_csv(path, rejections: Optional[list] = None) -> list:
    """Read a Lichess puzzle CSV.

    Without ``rejections`` the first bad row raises its :class:`DatasetError`.
    With a list, bad rows are appended to it as :class:`RowRejection` and
    ingestion continues; accepted plus rejected always equals rows read.
    Row numbers count the header as row 1.
    """
    path = Path(path)
    puzzles = []
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != LICHESS_HEADER:
            raise HeaderMismatch(f"expected {','.join(LICHESS_HEADER)}, got {header}")
        for cells in reader:
            row = reader.line_num
            pid = cells[0] if cells else ""
            try:
                if len(cells) != len(LICHESS_HEADER):
                    raise MalformedRow(f"expected {len(LICHESS_HEADER)} columns, got {len(cells)}", row)
                rec = dict(zip(LICHESS_HEADER, cells))
                puzzles.append(make_puzzle(
                    rec["PuzzleId"], rec["FEN"], rec["Moves"], rec["Rating"],
                    rec["Themes"], rec["GameUrl"], row=row,
                ))
            except DatasetError as exc:
                if rejections is None:
                    raise
                rejections.append(RowRejection(row, pid, exc.code, str(exc)))
    if rejections:
        log.info("ingested %d puzzles, rejected %d rows", len(puzzles), len(rejections))
    return puzzles


def write_lichess_csv(puzzles: Iterable[Puzzle], path) -> None:
    """Write puzzles back out in the Lichess CSV schema (unused columns blank)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LICHESS_HEADER)
        for p in puzzles:
            d = p.to_dict()
            writer.writerow([d["id"], d["fen"], d["moves"], d["rating"], "", "", "", " ".join(d["themes"]), d["source_url"], ""])


def theme_histogram(puzzles: Iterable) -> Counter:
    """Number of puzzles carrying each theme."""
    counts: Counter = Counter()
    for p in puzzles:
        counts.update(set(p.themes))
    return counts


# --- records ----------------------------------------------------------------

@dataclass(frozen=True)
class SftRecord:
    puzzle_id: str
    prompt: str
    response: str
    teacher_model: str
    themes: tuple
    rating: int

    def to_dict(self) -> dict:
        return {k: (list(v) if k == "themes" else v) for k, v in zip(SFT_FIELDS, self._values())}

    def _values(self):
        return (self.puzzle_id, self.prompt, self.response, self.teacher_model, self.themes, self.rating)

    @classmethod
    def from_dict(cls, data: dict) -> "SftRecord":
        return cls(data["puzzle_id"], data["prompt"], data["response"], data["teacher_model"], tuple(data["themes"]), data["rating"])


@dataclass(frozen=True)
class RlvrRecord:
    puzzle_id: str
    prompt: str
    ground_truth: str
    themes: tuple
    rating: int

    def to_dict(self) -> dict:
        return {
            "puzzle_id": self.puzzle_id,
            "prompt": self.prompt,
            "ground_truth": self.ground_truth,
            "themes": list(self.themes),
            "rating": self.rating,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RlvrRecord":
        return cls(data["puzzle_id"], data["prompt"], data["ground_truth"], tuple(data["themes"]), data["rating"])


def rlvr_record(puzzle: Puzzle) -> RlvrRecord:
    from .prompts import build_solver_prompt

    return RlvrRecord(puzzle.id, build_solver_prompt(puzzle), puzzle.solution.uci(), tuple(sorted(puzzle.themes)), puzzle.rating)


def sft_record(puzzle: Puzzle, response: str, teacher_model: str) -> SftRecord:
    from .prompts import build_solver_prompt

    return SftRecord(puzzle.id, build_solver_prompt(puzzle), response, teacher_model, tuple(sorted(puzzle.themes)), puzzle.rating)


def write_jsonl(rows: Iterable[dict], path) -> int:
    n = 0
    try:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
                n += 1
    except OSError as exc:
        raise IoFailure(str(exc)) from None
    return n


def read_jsonl(path) -> list:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def stats_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".stats.txt")


def _emit(records, path, label: str) -> Path:
    records = list(records)
    write_jsonl((r.to_dict() for r in records), path)
    out = stats_path(path)
    try:
        out.write_text(stats_report(records, label=label), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from None
    return Path(path)


def emit_sft(records: Iterable[SftRecord], path) -> Path:
    return _emit(records, path, "SFT")


def emit_rlvr(records: Iterable[RlvrRecord], path) -> Path:
    return _emit(records, path, "RLVR")


def load_sft(path) -> list:
    return [SftRecord.from_dict(d) for d in read_jsonl(path)]


def load_rlvr(path) -> list:
    return [RlvrRecord.from_dict(d) for d in read_jsonl(path)]


# --- statistics -------------------------------------------------------------

@dataclass
class DatasetStats:
    total: int
    unique_themes: int
    rating_min: Optional[int]
    rating_max: Optional[int]
    rating_mean: Optional[float]
    theme_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "unique_themes": self.unique_themes,
            "rating_min": self.rating_min,
            "rating_max": self.rating_max,
            "rating_mean": self.rating_mean,
            "theme_counts": self.theme_counts,
        }


def dataset_stats(items: Iterable) -> DatasetStats:
    """Totals, rating summary and per-theme counts for puzzles or records."""
    items = list(items)
    counts = theme_histogram(items)
    ratings = [it.rating for it in items]
    ordered = dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return DatasetStats(
        total=len(items),
        unique_themes=len(counts),
        rating_min=min(ratings) if ratings else None,
        rating_max=max(ratings) if ratings else None,
        rating_mean=sum(ratings) / len(ratings) if ratings else None,
        theme_counts=ordered,
    )


def _fmt_int(n) -> str:
    return "-" if n is None else f"{n:,}"


def _theme_blocks(counts: dict, label: str, width: int = 12) -> list:
    items = list(counts.items())
    blocks = []
    for start in range(0, len(items), width):
        chunk = items[start:start + width]
        cols = [max(len(name), len(_fmt_int(c))) for name, c in chunk]
        lab = max(len(label), 5)
        head = " " * lab + " | " + " | ".join(n.rjust(w) for (n, _), w in zip(chunk, cols))
        row = label.ljust(lab) + " | " + " | ".join(_fmt_int(c).rjust(w) for (_, c), w in zip(chunk, cols))
        blocks.append(head + "\n" + row)
    return blocks


def stats_report(items: Iterable, label: str = "Data") -> str:
    """Summary table plus per-theme counts, most frequent first."""
    s = dataset_stats(items)
    mean = "-" if s.rating_mean is None else f"{s.rating_mean:,.0f}"
    rng = "-" if s.rating_min is None else f"{s.rating_min:,}--{s.rating_max:,}"
    rows = [
        ("Total samples", _fmt_int(s.total)),
        ("Unique themes", _fmt_int(s.unique_themes)),
        ("Rating range", rng),
        ("Average rating", mean),
    ]
    w = max(len(k) for k, _ in rows)
    vw = max(len(label), *(len(v) for _, v in rows))
    lines = [" " * w + " | " + label.rjust(vw)]
    lines += [k.ljust(w) + " | " + v.rjust(vw) for k, v in rows]
    parts = ["\n".join(lines)]
    parts += _theme_blocks(s.theme_counts, label)
    return "\n\n".join(parts) + "\n"
