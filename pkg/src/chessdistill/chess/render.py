"""Textual renderings of a position used inside prompts."""

from __future__ import annotations

from .board import legal_moves
from .types import Color, Position

# K, Q, R, B, N, P
_KIND_ORDER = {6: 0, 5: 1, 4: 2, 3: 3, 2: 4, 1: 5}


def render_piece_arrangement(position: Position) -> str:
    """One-line piece list, e.g. ``White: Ka1; Black: Ka8``.

    Grouped White then Black; within a color ordered K, Q, R, B, N, P and then
    by square name.
    """
    groups = []
    for color in (Color.WHITE, Color.BLACK):
        entries = sorted(
            (_KIND_ORDER[piece.kind], square.name)
            for square, piece in position.pieces()
            if piece.color is color
        )
        letters = "KQRBNP"
        text = ", ".join(letters[order] + name for order, name in entries)
        groups.append(f"{color.title}: {text}")
    return "; ".join(groups)


def render_legal_moves(position: Position) -> str:
    return ", ".join(m.uci() for m in legal_moves(position))
