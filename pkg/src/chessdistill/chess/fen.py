"""FEN codec with strict validation."""

from __future__ import annotations

from .types import (
    BLACK_BIT,
    BLACK_OO,
    BLACK_OOO,
    KING,
    PAWN,
    WHITE_OO,
    WHITE_OOO,
    ChessError,
    Color,
    Piece,
    Position,
    Square,
)

STARTING_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"

_CASTLING_LETTERS = (("K", WHITE_OO), ("Q", WHITE_OOO), ("k", BLACK_OO), ("q", BLACK_OOO))


class FenError(ChessError):
    code = "FenError"


class FieldCount(FenError):
    code = "FieldCount"


class BadPlacement(FenError):
    code = "BadPlacement"


class IllegalPiece(FenError):
    code = "IllegalPiece"


class MissingKing(FenError):
    code = "MissingKing"


class DuplicateKing(FenError):
    code = "DuplicateKing"


class BadSideToMove(FenError):
    code = "BadSideToMove"


class BadCastling(FenError):
    code = "BadCastling"


class BadEnPassant(FenError):
    code = "BadEnPassant"


class BadClock(FenError):
    code = "BadClock"


class BadPawns(FenError):
    code = "BadPawns"


class OpponentInCheck(FenError):
    code = "OpponentInCheck"


def _parse_placement(text: str) -> list:
    ranks = text.split("/")
    if len(ranks) != 8:
        raise BadPlacement(f"expected 8 ranks, got {len(ranks)}")
    board = [0] * 64
    for row, rank_text in enumerate(ranks):
        rank = 7 - row
        file = 0
        for ch in rank_text:
            if ch in "12345678":
                file += int(ch)
            elif ch in "pnbrqkPNBRQK":
                if file > 7:
                    raise BadPlacement(f"rank {rank + 1} overflows")
                board[rank * 8 + file] = Piece.from_symbol(ch).code
                file += 1
            else:
                raise IllegalPiece(repr(ch))
            if file > 8:
                raise BadPlacement(f"rank {rank + 1} overflows")
        if file != 8:
            raise BadPlacement(f"rank {rank + 1} has {file} files")
    return board


def _parse_castling(text: str) -> int:
    if text == "-":
        return 0
    rights = 0
    for ch in text:
        bit = dict(_CASTLING_LETTERS).get(ch)
        if bit is None or rights & bit:
            raise BadCastling(repr(text))
        rights |= bit
    return rights


def _parse_int(text: str, minimum: int, name: str) -> int:
    if not text.isdigit():
        raise BadClock(f"{name} {text!r}")
    value = int(text)
    if value < minimum:
        raise BadClock(f"{name} {value} < {minimum}")
    return value


def _check_invariants(board: list, turn: Color, ep) -> None:
    from . import kernel

    for color_bit, name in ((0, "white"), (BLACK_BIT, "black")):
        kings = board.count(KING | color_bit)
        if kings == 0:
            raise MissingKing(name)
        if kings > 1:
            raise DuplicateKing(name)
        if board.count(PAWN | color_bit) > 8:
            raise BadPawns(f"more than 8 {name} pawns")
    for sq in list(range(8)) + list(range(56, 64)):
        if board[sq] & 7 == PAWN:
            raise BadPawns(f"pawn on {Square.from_index(sq).name}")
    if ep is not None:
        # target must sit behind an enemy pawn that just advanced two squares
        if turn is Color.WHITE:
            ok = ep.rank == 5 and board[ep.index] == 0 and board[ep.index + 8] == 0 \
                and board[ep.index - 8] == PAWN | BLACK_BIT
        else:
            ok = ep.rank == 2 and board[ep.index] == 0 and board[ep.index - 8] == 0 \
                and board[ep.index + 8] == PAWN
        if not ok:
            raise BadEnPassant(ep.name)
    if kernel.in_check(board, turn is not Color.WHITE):
        raise OpponentInCheck("side not to move is in check")


def parse_fen(text: str) -> Position:
    """Parse a six-field FEN string into a validated :class:`Position`."""
    fields = text.split()
    if len(fields) != 6:
        raise FieldCount(f"expected 6 fields, got {len(fields)}")
    placement, side, castling, ep_text, half, full = fields
    board = _parse_placement(placement)
    if side not in ("w", "b"):
        raise BadSideToMove(repr(side))
    turn = Color(side)
    rights = _parse_castling(castling)
    if ep_text == "-":
        ep = None
    else:
        try:
            ep = Square.parse(ep_text)
        except ValueError:
            raise BadEnPassant(repr(ep_text)) from None
    halfmove = _parse_int(half, 0, "halfmove clock")
    fullmove = _parse_int(full, 1, "fullmove number")
    _check_invariants(board, turn, ep)
    return Position(tuple(board), turn, rights, ep, halfmove, fullmove)


def format_placement(board) -> str:
    rows = []
    for rank in range(7, -1, -1):
        row, empty = [], 0
        for file in range(8):
            code = board[rank * 8 + file]
            if code:
                if empty:
                    row.append(str(empty))
                    empty = 0
                row.append(Piece.from_code(code).symbol)
            else:
                empty += 1
        if empty:
            row.append(str(empty))
        rows.append("".join(row))
    return "/".join(rows)


def format_fen(position: Position) -> str:
    castling = "".join(letter for letter, bit in _CASTLING_LETTERS if position.castling & bit) or "-"
    ep = position.en_passant.name if position.en_passant is not None else "-"
    return " ".join((
        format_placement(position.board),
        position.turn.value,
        castling,
        ep,
        str(position.halfmove_clock),
        str(position.fullmove_number),
    ))
