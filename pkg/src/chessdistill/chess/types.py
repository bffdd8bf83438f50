"""Value types for squares, pieces, moves and positions."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import NamedTuple, Optional

FILE_NAMES = "abcdefgh"
RANK_NAMES = "12345678"

# Integer piece codes shared with the move-generation kernels.
EMPTY = 0
PAWN, KNIGHT, BISHOP, ROOK, QUEEN, KING = 1, 2, 3, 4, 5, 6
BLACK_BIT = 8

# Castling-rights bitmask.
WHITE_OO, WHITE_OOO, BLACK_OO, BLACK_OOO = 1, 2, 4, 8

_UCI_RE = re.compile(r"^[a-h][1-8][a-h][1-8][qrbn]?$")


class ChessError(ValueError):
    """Base class for chess-domain errors. ``code`` is a stable identifier."""

    code = "ChessError"

    def __init__(self, message: str = ""):
        super().__init__(f"{self.code}: {message}" if message else self.code)


class IllegalMove(ChessError):
    code = "IllegalMove"


class InvalidMoveText(ChessError):
    code = "InvalidMoveText"


class Color(enum.Enum):
    WHITE = "w"
    BLACK = "b"

    @property
    def other(self) -> "Color":
        return Color.BLACK if self is Color.WHITE else Color.WHITE

    @property
    def title(self) -> str:
        return "White" if self is Color.WHITE else "Black"


class PieceKind(enum.IntEnum):
    PAWN = PAWN
    KNIGHT = KNIGHT
    BISHOP = BISHOP
    ROOK = ROOK
    QUEEN = QUEEN
    KING = KING

    @property
    def letter(self) -> str:
        return " PNBRQK"[self.value]

    @classmethod
    def from_letter(cls, letter: str) -> "PieceKind":
        idx = " PNBRQK".find(letter.upper())
        if idx <= 0:
            raise ValueError(f"not a piece letter: {letter!r}")
        return cls(idx)


PROMOTION_KINDS = (PieceKind.QUEEN, PieceKind.ROOK, PieceKind.BISHOP, PieceKind.KNIGHT)


class Piece(NamedTuple):
    color: Color
    kind: PieceKind

    @property
    def code(self) -> int:
        return int(self.kind) | (BLACK_BIT if self.color is Color.BLACK else 0)

    @property
    def symbol(self) -> str:
        """FEN letter: uppercase for white."""
        letter = self.kind.letter
        return letter if self.color is Color.WHITE else letter.lower()

    @classmethod
    def from_code(cls, code: int) -> "Piece":
        return cls(Color.BLACK if code & BLACK_BIT else Color.WHITE, PieceKind(code & 7))

    @classmethod
    def from_symbol(cls, symbol: str) -> "Piece":
        color = Color.WHITE if symbol.isupper() else Color.BLACK
        return cls(color, PieceKind.from_letter(symbol))


class Square(NamedTuple):
    file: int
    rank: int

    @property
    def index(self) -> int:
        return self.rank * 8 + self.file

    @property
    def name(self) -> str:
        return FILE_NAMES[self.file] + RANK_NAMES[self.rank]

    def __str__(self) -> str:
        return self.name

    @classmethod
    def from_index(cls, index: int) -> "Square":
        if not 0 <= index < 64:
            raise ValueError(f"square index out of range: {index}")
        return _SQUARES[index]

    @classmethod
    def parse(cls, text: str) -> "Square":
        if len(text) != 2 or text[0] not in FILE_NAMES or text[1] not in RANK_NAMES:
            raise ValueError(f"not a square: {text!r}")
        return _SQUARES[RANK_NAMES.index(text[1]) * 8 + FILE_NAMES.index(text[0])]


_SQUARES = tuple(tuple.__new__(Square, (i % 8, i // 8)) for i in range(64))


class Move(NamedTuple):
    from_square: Square
    to_square: Square
    promotion: Optional[PieceKind] = None

    def uci(self) -> str:
        text = self.from_square.name + self.to_square.name
        if self.promotion is not None:
            text += self.promotion.letter.lower()
        return text

    def __str__(self) -> str:
        return self.uci()

    @property
    def code(self) -> int:
        promo = int(self.promotion) if self.promotion is not None else 0
        return self.from_square.index | (self.to_square.index << 6) | (promo << 12)

    @classmethod
    def from_code(cls, code: int) -> "Move":
        promo = code >> 12
        return cls(
            _SQUARES[code & 63],
            _SQUARES[(code >> 6) & 63],
            PieceKind(promo) if promo else None,
        )

    @classmethod
    def from_uci(cls, text: str) -> "Move":
        """Parse a UCI move such as ``e2e4`` or ``c2b1q`` (case-insensitive)."""
        norm = text.strip().lower()
        if not _UCI_RE.match(norm) or norm[:2] == norm[2:4]:
            raise InvalidMoveText(repr(text))
        promo = PieceKind.from_letter(norm[4]) if len(norm) == 5 else None
        return cls(Square.parse(norm[:2]), Square.parse(norm[2:4]), promo)


def is_uci_text(text: str) -> bool:
    norm = text.strip().lower()
    return bool(_UCI_RE.match(norm)) and norm[:2] != norm[2:4]


@dataclass(frozen=True)
class Position:
    """Immutable chess position.

    ``board`` holds 64 integer piece codes indexed a1=0 .. h8=63; use
    :meth:`piece_at` for the typed view.
    """

    board: tuple
    turn: Color
    castling: int
    en_passant: Optional[Square]
    halfmove_clock: int
    fullmove_number: int

    def piece_at(self, square: Square) -> Optional[Piece]:
        code = self.board[square.index]
        return Piece.from_code(code) if code else None

    def pieces(self):
        """Yield ``(square, piece)`` pairs for occupied squares."""
        for idx, code in enumerate(self.board):
            if code:
                yield _SQUARES[idx], Piece.from_code(code)

    def king_square(self, color: Color) -> Square:
        code = KING | (BLACK_BIT if color is Color.BLACK else 0)
        return _SQUARES[self.board.index(code)]

    def has_castling(self, right: int) -> bool:
        return bool(self.castling & right)

    @property
    def castling_rights(self) -> tuple:
        """``(white_oo, white_ooo, black_oo, black_ooo)`` booleans."""
        return tuple(bool(self.castling & r) for r in (WHITE_OO, WHITE_OOO, BLACK_OO, BLACK_OOO))

    def __str__(self) -> str:
        rows = []
        for rank in range(7, -1, -1):
            row = []
            for file in range(8):
                code = self.board[rank * 8 + file]
                row.append(Piece.from_code(code).symbol if code else ".")
            rows.append(" ".join(row))
        return "\n".join(rows)
