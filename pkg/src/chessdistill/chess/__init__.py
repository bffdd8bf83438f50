"""Chess domain core: FEN codec, legal moves, move application, renderings."""

from .board import apply_move, is_check, is_checkmate, is_legal, is_stalemate, legal_moves, perft, replay
from .fen import STARTING_FEN, FenError, format_fen, parse_fen
from .kernel import BACKEND
from .render import render_legal_moves, render_piece_arrangement
from .types import (
    ChessError,
    Color,
    IllegalMove,
    InvalidMoveText,
    Move,
    Piece,
    PieceKind,
    Position,
    Square,
    is_uci_text,
)

__all__ = [
    "BACKEND",
    "STARTING_FEN",
    "ChessError",
    "Color",
    "FenError",
    "IllegalMove",
    "InvalidMoveText",
    "Move",
    "Piece",
    "PieceKind",
    "Position",
    "Square",
    "apply_move",
    "format_fen",
    "is_check",
    "is_checkmate",
    "is_legal",
    "is_stalemate",
    "is_uci_text",
    "legal_moves",
    "parse_fen",
    "perft",
    "render_legal_moves",
    "render_piece_arrangement",
    "replay",
]
