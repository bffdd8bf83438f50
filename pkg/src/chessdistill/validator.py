"""Checks applied to teacher traces before they become SFT data."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .chess import IllegalMove, Move, apply_move, is_uci_text, legal_moves

MARKER = "FINAL_ANSWER:"
_MARKER_LINE = re.compile(r"^[ \t>*_`]*FINAL_ANSWER:[ \t*_`]*(\S*)", re.MULTILINE)
_TRAILING_PUNCT = ".,;:!?*`)\"'"

FORBIDDEN_PHRASES = (
    "I see",
    "I notice",
    "I was given",
    "the solution provided",
    "engine score",
    "centipawn",
    "Stockfish",
    "rating",
)

# mate-pattern tags and how they read in prose
THEME_PHRASES = {
    "backRankMate": ("back rank mate", "back-rank mate"),
    "smotheredMate": ("smothered mate",),
    "arabianMate": ("arabian mate",),
    "anastasiaMate": ("anastasia mate", "anastasia's mate"),
    "bodenMate": ("boden mate", "boden's mate"),
    "hookMate": ("hook mate",),
    "doubleBishopMate": ("double bishop mate",),
    "dovetailMate": ("dovetail mate",),
    "balestraMate": ("balestra mate",),
    "vukovicMate": ("vukovic mate",),
    "killBoxMate": ("kill box mate",),
    "blindSwineMate": ("blind swine mate",),
    "triangleMate": ("triangle mate",),
    "cornerMate": ("corner mate",),
}

_ABBREVIATIONS = {"e.g.", "i.e.", "vs.", "etc.", "cf."}
_MOVE_NUMBER = re.compile(r"^\(?\d+\.+$")
_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)")
_UCI_TOKEN = re.compile(r"\b[a-h][1-8][a-h][1-8][qrbnQRBN]?\b")


class ExtractionError(ValueError):
    code = "ExtractionError"


class NoMarker(ExtractionError):
    code = "NoMarker"


class UnparseableMove(ExtractionError):
    code = "UnparseableMove"


def marker_lines(text: str) -> list:
    """Answer tokens of every line-anchored ``FINAL_ANSWER:`` marker."""
    return _MARKER_LINE.findall(text)


def extract_final_answer(text: str) -> Move:
    """Move from the last ``FINAL_ANSWER:`` line, lowercased UCI."""
    tokens = marker_lines(text)
    if not tokens:
        raise NoMarker("no FINAL_ANSWER line")
    token = tokens[-1].rstrip(_TRAILING_PUNCT).lower()
    if not is_uci_text(token):
        raise UnparseableMove(f"{tokens[-1]!r} is not a UCI move")
    return Move.from_uci(token)


def _strip_markers(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if not _MARKER_LINE.match(line))


def count_sentences(text: str) -> int:
    """Heuristic sentence count.

    A run of ``.``, ``!`` or ``?`` followed by whitespace or the end of text
    closes a sentence, except after move numbers (``1.``, ``12...``) and
    common abbreviations, or when the next word starts lowercase. Marker
    lines are ignored and a trailing fragment without punctuation counts.
    """
    body = _strip_markers(text)
    count = 0
    start = 0
    for m in _SENTENCE_END.finditer(body):
        before = body[start:m.end()]
        last_token = before.split()[-1] if before.split() else ""
        if _MOVE_NUMBER.match(last_token) or last_token.lower() in _ABBREVIATIONS:
            continue
        rest = body[m.end():].lstrip()
        if rest and rest[0].islower():
            continue
        if re.search(r"[A-Za-z]", before):
            count += 1
        start = m.end()
    if re.search(r"[A-Za-z]", body[start:]):
        count += 1
    return count


def _phrase_pattern(phrase: str) -> re.Pattern:
    # whole words, optional plural
    return re.compile(r"(?<![A-Za-z])" + re.escape(phrase) + r"s?(?![A-Za-z])", re.IGNORECASE)


_FORBIDDEN_PATTERNS = tuple((p, _phrase_pattern(p)) for p in FORBIDDEN_PHRASES)


def leaked_themes(text: str, themes) -> list:
    """Theme tags (or their prose names) appearing in ``text``.

    Tags are matched case-sensitively as whole words. Single lowercase words
    such as ``fork`` or ``mate`` are ordinary chess vocabulary and only
    camelCase or digit-bearing tags are treated as leakage.
    """
    hits = []
    for tag in sorted(themes):
        if tag.islower() and tag.isalpha():
            continue
        if re.search(r"(?<![A-Za-z0-9])" + re.escape(tag) + r"(?![A-Za-z0-9])", text):
            hits.append(tag)
            continue
        for phrase in THEME_PHRASES.get(tag, ()):
            if _phrase_pattern(phrase).search(text):
                hits.append(tag)
                break
    return hits


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""
    mandatory: bool = True


@dataclass
class ValidationReport:
    puzzle_id: str
    checks: list = field(default_factory=list)
    extracted_answer: Optional[Move] = None

    @property
    def verdict(self) -> str:
        return "accepted" if all(c.passed for c in self.checks if c.mandatory) else "rejected"

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

    @property
    def failed(self) -> list:
        return [c.name for c in self.checks if c.mandatory and not c.passed]

    def to_dict(self) -> dict:
        return {
            "puzzle_id": self.puzzle_id,
            "verdict": self.verdict,
            "extracted_answer": self.extracted_answer.uci() if self.extracted_answer else None,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail, "mandatory": c.mandatory}
                for c in self.checks
            ],
        }


@dataclass(frozen=True)
class ValidatorConfig:
    min_sentences: int = 4
    max_sentences: int = 10
    mate_in_one_min_sentences: int = 2


def _grounding_positions(puzzle, analysis):
    positions = [puzzle.position]
    lines = [line.moves for line in analysis.lines] if analysis is not None else [(puzzle.solution, *puzzle.continuation)]
    for moves in lines:
        pos = puzzle.position
        for move in moves:
            try:
                pos = apply_move(pos, move)
            except IllegalMove:
                break
            positions.append(pos)
    return positions


def validate_trace(trace: str, puzzle, expected: Move, analysis=None, cfg: ValidatorConfig = ValidatorConfig()) -> ValidationReport:
    report = ValidationReport(puzzle.id)
    checks = report.checks

    try:
        answer = extract_final_answer(trace)
        report.extracted_answer = answer
        ok = answer.uci() == expected.uci()
        checks.append(Check("answer_match", ok, "" if ok else f"got {answer.uci()}, expected {expected.uci()}"))
    except ExtractionError as exc:
        checks.append(Check("answer_match", False, exc.code))

    n = count_sentences(trace)
    low = cfg.mate_in_one_min_sentences if "mateIn1" in puzzle.themes else cfg.min_sentences
    ok = low <= n <= cfg.max_sentences
    checks.append(Check("sentence_count", ok, f"{n} sentences, allowed [{low}, {cfg.max_sentences}]"))

    hits = [phrase for phrase, pat in _FORBIDDEN_PATTERNS if pat.search(trace)]
    hits += [f"theme:{t}" for t in leaked_themes(trace, puzzle.themes)]
    checks.append(Check("forbidden_phrases", not hits, ", ".join(hits)))

    markers = len(marker_lines(trace))
    checks.append(Check("no_marker_duplication", markers == 1, f"{markers} FINAL_ANSWER lines"))

    positions = _grounding_positions(puzzle, analysis)
    legal_anywhere = {m.uci() for pos in positions for m in legal_moves(pos)}
    ungrounded = sorted({t.lower() for t in _UCI_TOKEN.findall(trace)} - legal_anywhere)
    checks.append(Check("move_grounding", not ungrounded, ", ".join(ungrounded), mandatory=False))
    return report
