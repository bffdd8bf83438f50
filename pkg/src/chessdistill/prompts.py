"""Solver and distillation prompt rendering.

Templates live in ``templates/*.v1.txt`` and are filled with ``str.format``;
output is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

from .chess import format_fen, render_legal_moves, render_piece_arrangement

TEMPLATE_VERSION = "v1"
PV_MODES = ("best_move", "multi_pv", "omitted")
MATE_IN_ONE = "mateIn1"


class MissingAnalysis(ValueError):
    code = "MissingAnalysis"


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("chessdistill").joinpath("templates", f"{name}.{TEMPLATE_VERSION}.txt").read_text(encoding="utf-8")


@dataclass(frozen=True)
class PromptVariant:
    kind: str = "distill"
    pv_mode: str = "best_move"
    include_themes: bool = True
    feigned: bool = True

    def __post_init__(self):
        if self.kind not in ("solver", "distill"):
            raise ValueError(f"unknown prompt kind {self.kind!r}")
        if self.pv_mode not in PV_MODES:
            raise ValueError(f"unknown pv_mode {self.pv_mode!r}")
        if self.kind == "solver" and (self.pv_mode != "omitted" or self.include_themes):
            raise ValueError("solver prompts carry no PV and no themes")

    def effective_pv_mode(self, puzzle) -> str:
        if MATE_IN_ONE in puzzle.themes:
            return "omitted"
        return self.pv_mode


SOLVER = PromptVariant("solver", "omitted", False, True)

# named distillation variants (the full configuration plus its ablations)
VARIANTS = {
    "best_move": PromptVariant(),
    "multi_pv": PromptVariant(pv_mode="multi_pv"),
    "no_pv": PromptVariant(pv_mode="omitted"),
    "no_theme": PromptVariant(include_themes=False),
    "no_feigned": PromptVariant(feigned=False),
}


def build_solver_prompt(puzzle) -> str:
    """Hint-free prompt shown to the student and to evaluated models."""
    pos = puzzle.position
    return load_template("solver").format(
        fen=format_fen(pos),
        piece_arrangement=render_piece_arrangement(pos),
        legal_moves=render_legal_moves(pos),
    )


def render_pv_lines(lines) -> str:
    """One line per PV: ``<rank>. <uci> <uci> ... (<score>)``."""
    return "\n".join(
        f"{line.rank}. {' '.join(m.uci() for m in line.moves)} ({line.score})" for line in lines
    )


def build_distill_prompt(puzzle, analysis=None, variant: Optional[PromptVariant] = None) -> str:
    """Teacher prompt: instruction, hidden context and task description."""
    variant = variant or VARIANTS["best_move"]
    if variant.kind != "distill":
        raise ValueError("build_distill_prompt needs a distill variant")
    pv_mode = variant.effective_pv_mode(puzzle)
    if pv_mode != "omitted" and (analysis is None or not analysis.lines):
        raise MissingAnalysis(f"puzzle {puzzle.id} has no analysis for pv_mode={pv_mode}")
    pos = puzzle.position
    move = puzzle.solution.uci()
    rows = [
        f"FEN: {format_fen(pos)}",
        f"Pieces: {render_piece_arrangement(pos)}",
        f"Side to Move: {pos.turn.title}",
        f"Opponent's Last Move: {puzzle.setup_move.uci()}",
        f"Solution: {move}",
        f"Rating: {puzzle.rating}",
    ]
    if variant.include_themes:
        rows.append(f"Themes: {', '.join(sorted(puzzle.themes))}")
    if pv_mode != "omitted":
        lines = analysis.lines[:1] if pv_mode == "best_move" else analysis.lines
        rows.append("PVs:\n" + render_pv_lines(lines))
    rows.append(f"Legal Moves: {render_legal_moves(pos)}")
    task = load_template("distill_task_feigned" if variant.feigned else "distill_task_plain").format(move=move)
    return "\n\n".join((load_template("distill_general").rstrip("\n"), "\n".join(rows), task.rstrip("\n"))) + "\n"
