"""Legal move generation, move application and perft over :class:`Position`."""

from __future__ import annotations

from . import kernel
from .types import BLACK_BIT, PAWN, Color, IllegalMove, Move, Position, Square


def _raw(position: Position) -> tuple:
    ep = position.en_passant.index if position.en_passant is not None else -1
    return list(position.board), position.turn is Color.WHITE, position.castling, ep


def legal_moves(position: Position) -> list[Move]:
    """All legal moves, sorted by UCI text."""
    codes = kernel.legal_moves(*_raw(position))
    return sorted((Move.from_code(c) for c in codes), key=Move.uci)


def is_legal(position: Position, move: Move) -> bool:
    return move.code in kernel.legal_moves(*_raw(position))


def is_check(position: Position) -> bool:
    return bool(kernel.in_check(list(position.board), position.turn is Color.WHITE))


def is_checkmate(position: Position) -> bool:
    return is_check(position) and not kernel.legal_moves(*_raw(position))


def is_stalemate(position: Position) -> bool:
    return not is_check(position) and not kernel.legal_moves(*_raw(position))


def apply_move(position: Position, move: Move) -> Position:
    """Return the successor position; raises :class:`IllegalMove` otherwise."""
    board, white, castling, ep = _raw(position)
    if move.code not in kernel.legal_moves(board, white, castling, ep):
        raise IllegalMove(f"{move.uci()} in {position.turn.title.lower()}-to-move position")
    moved = board[move.from_square.index]
    reset_clock = moved & 7 == PAWN or board[move.to_square.index] != 0
    castling, new_ep, _ = kernel.make_move(board, white, castling, ep, move.code)
    fullmove = position.fullmove_number + (0 if white else 1)
    return Position(
        board=tuple(board),
        turn=position.turn.other,
        castling=castling,
        en_passant=Square.from_index(new_ep) if new_ep >= 0 else None,
        halfmove_clock=0 if reset_clock else position.halfmove_clock + 1,
        fullmove_number=fullmove,
    )


def replay(position: Position, moves) -> list[Position]:
    """Positions after each move of ``moves`` (not including ``position``)."""
    out = []
    for move in moves:
        position = apply_move(position, move)
        out.append(position)
    return out


def perft(position: Position, depth: int) -> int:
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return kernel.perft(*_raw(position), depth)


def piece_count(position: Position, color: Color) -> int:
    bit = BLACK_BIT if color is Color.BLACK else 0
    return sum(1 for c in position.board if c and c & BLACK_BIT == bit)
